"""Command-line front end: simulate / generate-measurements / infer /
identify / dist-check.

Configuration comes from an INI-style file (one section per command) with
command-line flags taking precedence.  Every command echoes its resolved
settings into a manifest file next to its CSV outputs, so a run is
reproducible from (config, seed) alone.  CSV schemas are documented in
SCHEMAS.md.

Exit codes: 0 success, 1 usage/config error, 2 runtime/numeric error.
"""

import argparse
import configparser
import csv
import os
import sys
from dataclasses import replace

import numpy as np

from . import dist, rng as rng_mod
from .epi import (
    MODEL_COMPARTMENTS,
    CompartmentState,
    ParamSet,
    PRESETS,
    preset,
    simulate_deterministic,
    simulate_ensemble,
)
from .mcmc import FREE_PARAMS, ChainConfig, run_chain
from .smc import DegenerateEnsembleError, MeasurementSeries
from .sysid import (
    DependentColumnError,
    DesignMatrix,
    RankDeficiencyError,
    VolterraSpec,
    frols,
    volterra_terms,
)

OUT_DIR_ENV = "EPICHAIN_OUT_DIR"

PARAM_FLAGS = ("beta", "alpha", "gamma", "mu", "p_frac", "nu", "dt")
STATE_FLAGS = ("s0", "e0", "i0", "a0", "r0")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_manifest(out_dir, command, settings):
    path = os.path.join(out_dir, f"{command}_manifest.txt")
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(settings):
            fh.write(f"{key} = {_fmt(settings[key])}\n")


def _resolve_out_dir(args):
    out = args.out_dir or os.environ.get(OUT_DIR_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _load_config_defaults(args, command):
    """Fill unset args from the [command] section of the config file."""
    if not args.config:
        return
    parser = configparser.ConfigParser()
    read = parser.read(args.config)
    if not read:
        raise UsageError(f"config file not found: {args.config}")
    if not parser.has_section(command):
        return
    for key, raw in parser.items(command):
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise UsageError(f"unknown config key [{command}] {key}")
        if attr in args._explicit:
            continue  # flags win over file
        current = getattr(args, attr)
        if isinstance(current, bool):
            setattr(args, attr, raw.strip().lower() in ("1", "true", "yes", "on"))
        elif isinstance(current, int):
            setattr(args, attr, int(raw))
        elif isinstance(current, float):
            setattr(args, attr, float(raw))
        else:
            setattr(args, attr, raw)


def _model_setup(args):
    """Resolve (kind, ParamSet, initial state) from preset and/or flags."""
    if args.preset:
        kind, params, initial = preset(args.preset)
    elif args.model:
        kind = args.model.upper()
        if kind not in MODEL_COMPARTMENTS:
            raise UsageError(f"unknown model {args.model!r}")
        params = ParamSet()
        initial = None
    else:
        raise UsageError("either --preset or --model is required")

    overrides = {}
    for name in PARAM_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if args.n_pop is not None:
        overrides["n_pop"] = args.n_pop
    if overrides:
        params = replace(params, **overrides)

    state_overrides = {
        field.upper()[0]: getattr(args, field)
        for field in STATE_FLAGS
        if getattr(args, field, None) is not None
    }
    if initial is None:
        if "S" not in state_overrides or "I" not in state_overrides:
            raise UsageError("--model requires at least --s0 and --i0")
        counts = {c: state_overrides.get(c, 0) for c in MODEL_COMPARTMENTS[kind]}
        initial = CompartmentState(kind, **counts)
    elif state_overrides:
        initial = replace(initial, **state_overrides)
    if initial.total() != params.n_pop:
        raise UsageError(
            f"initial counts sum to {initial.total()}, expected n_pop={params.n_pop}"
        )
    return kind, params, initial


def _settings_dict(args, extra=None):
    skip = {"func", "command", "_explicit"}
    out = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    if extra:
        out.update(extra)
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    kind, params, initial = _model_setup(args)
    out_dir = _resolve_out_dir(args)
    ens = simulate_ensemble(
        kind,
        params,
        initial,
        args.steps,
        args.trajectories,
        args.seed,
        band=args.band,
        keep_trajectories=args.save_trajectories,
    )
    comps = ens.compartments
    header = ["t"]
    for c in comps:
        header += [f"{c}_mean", f"{c}_p05", f"{c}_p95"]
    rows = []
    for k, t in enumerate(ens.times):
        row = [t]
        for j in range(len(comps)):
            row += [ens.mean[k, j], ens.p_low[k, j], ens.p_high[k, j]]
        rows.append(row)
    _write_csv(os.path.join(out_dir, "summary.csv"), header, rows)
    if args.save_trajectories:
        header = ["trajectory", "t"] + list(comps)
        rows = []
        for i in range(ens.n_traj):
            for k, t in enumerate(ens.times):
                rows.append([i, t] + list(ens.trajectories[i, k]))
        _write_csv(os.path.join(out_dir, "trajectories.csv"), header, rows)
    _write_manifest(out_dir, "simulate", _settings_dict(args, {"model_kind": kind}))
    return 0


def cmd_generate_measurements(args):
    kind, params, initial = _model_setup(args)
    out_dir = _resolve_out_dir(args)
    traj = simulate_deterministic(kind, params, initial, args.steps)
    i_col = MODEL_COMPARTMENTS[kind].index("I")
    times = (initial.k + np.arange(args.steps + 1)) * params.dt
    rows = [[t, traj[k, i_col]] for k, t in enumerate(times)]
    _write_csv(os.path.join(out_dir, "measurements.csv"), ["t", "y"], rows)
    _write_manifest(
        out_dir, "generate-measurements", _settings_dict(args, {"model_kind": kind})
    )
    return 0


def _load_measurements(path, sigma):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            rows = [(float(r["t"]), float(r["y"])) for r in reader]
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read measurement file {path}: {exc}") from exc
    if not rows:
        raise UsageError(f"measurement file {path} is empty")
    # Row at t = 0 describes the known initial state, not a filter step.
    y = np.array([y for t, y in rows if t > 0.0])
    return MeasurementSeries(y=y, sigma=sigma)


def cmd_infer(args):
    kind, params, initial = _model_setup(args)
    out_dir = _resolve_out_dir(args)
    measurements = _load_measurements(args.measurements, args.sigma)
    free = FREE_PARAMS[kind]
    theta0 = {}
    for name in free:
        scale = args.theta0_p_scale if name == "p_frac" else args.theta0_scale
        theta0[name] = getattr(params, name) * scale
    stds = {name: args.proposal_frac * theta0[name] for name in free}
    config = ChainConfig(
        theta0=theta0,
        iterations=args.iterations,
        n_p=args.particles,
        seed=args.seed,
        proposal_stds=stds,
        ess_threshold=args.ess_threshold,
        resample_mode=args.resample,
        score_variant=args.score,
    )
    chain = run_chain(kind, params, initial, measurements, config)
    header = ["iteration"] + list(chain.names) + ["score", "accepted"]
    rows = [
        [i] + list(chain.samples[i]) + [chain.scores[i], int(chain.accepted[i])]
        for i in range(len(chain))
    ]
    _write_csv(os.path.join(out_dir, "chain.csv"), header, rows)
    kept = chain.samples[args.burn_in :: max(args.thin, 1)]
    if kept.size == 0:
        raise UsageError("burn-in leaves an empty chain")
    rows = []
    for j, name in enumerate(chain.names):
        col = kept[:, j]
        rows.append(
            [name, col.mean(), col.std(), np.percentile(col, 5.0), np.percentile(col, 95.0)]
        )
    _write_csv(
        os.path.join(out_dir, "posterior.csv"),
        ["parameter", "mean", "std", "p05", "p95"],
        rows,
    )
    _write_manifest(
        out_dir,
        "infer",
        _settings_dict(
            args,
            {
                "model_kind": kind,
                "acceptance_rate": chain.acceptance_rate,
                **{f"theta0_{k}": v for k, v in theta0.items()},
            },
        ),
    )
    return 0


def _load_identify_data(args):
    try:
        with open(args.data, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            table = []
            for lineno, row in enumerate(reader, start=2):
                try:
                    table.append([float(v) for v in row])
                except ValueError as exc:
                    col = next(i for i, v in enumerate(row) if _not_float(v))
                    raise UsageError(
                        f"{args.data}: line {lineno}, column {col + 1} "
                        f"({header[col]}): not a number"
                    ) from exc
    except OSError as exc:
        raise UsageError(f"cannot read data file {args.data}: {exc}") from exc
    if not table:
        raise UsageError(f"data file {args.data} has no rows")
    data = np.asarray(table)
    names = [h.strip() for h in header]
    if "y" not in names:
        raise UsageError(f"data file {args.data} needs a 'y' column")
    y = data[:, names.index("y")]
    if args.volterra:
        if "u" not in names:
            raise UsageError("--volterra expansion needs a 'u' column")
        u = data[:, names.index("u")]
        spec = VolterraSpec(
            max_lag=args.max_lag,
            max_order=args.max_order,
            include_constant=not args.no_constant,
        )
        design = volterra_terms(u, spec)
        return design, y[spec.max_lag :]
    candidates = [j for j, n in enumerate(names) if n != "y"]
    return DesignMatrix(data[:, candidates], [names[j] for j in candidates]), y


def _not_float(v):
    try:
        float(v)
        return False
    except ValueError:
        return True


def cmd_identify(args):
    design, y = _load_identify_data(args)
    out_dir = _resolve_out_dir(args)
    selection = frols(design, y, rho=args.rho, max_terms=args.max_terms)
    cumulative = np.cumsum(selection.err)
    rows = [
        [s + 1, selection.names[s], selection.indices[s], selection.err[s],
         cumulative[s], selection.coefficients[s]]
        for s in range(len(selection.indices))
    ]
    _write_csv(
        os.path.join(out_dir, "frols_report.csv"),
        ["order", "term", "candidate_index", "err", "err_cumulative", "coefficient"],
        rows,
    )
    _write_manifest(
        out_dir,
        "identify",
        _settings_dict(
            args,
            {
                "total_err": selection.total_err,
                "status": selection.status,
                "n_candidates": design.n_terms,
            },
        ),
    )
    return 0


def cmd_dist_check(args):
    out_dir = _resolve_out_dir(args)
    gen = rng_mod.substream(args.seed)
    lam, n, p = 5.0, 50, 0.3
    rows = []
    for nu in range(0, 9):
        # Poisson / NegBin pair
        draws = dist.overdispersed_poisson(np.full(args.samples, lam), float(nu), gen)
        name = "poisson" if nu == 0 else "negbin"
        rows.append(
            [nu, name, lam, draws.mean(), lam * (1.0 + nu), draws.var(ddof=1)]
        )
        # Binomial / BetaBin pair
        draws = dist.overdispersed_binomial(
            np.full(args.samples, n, dtype=np.int64), p, float(nu), gen
        )
        name = "binomial" if nu == 0 else "betabin"
        rows.append(
            [nu, name, n * p, draws.mean(), n * p * (1.0 - p) * (1.0 + nu),
             draws.var(ddof=1)]
        )
    _write_csv(
        os.path.join(out_dir, "dist_check.csv"),
        ["nu", "distribution", "analytic_mean", "mc_mean", "analytic_var", "mc_var"],
        rows,
    )
    _write_manifest(out_dir, "dist-check", _settings_dict(args))
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="INI config file; flags override its values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", help=f"output directory (default: ${OUT_DIR_ENV} or .)")
    p.add_argument("--threads", type=int, default=1,
                   help="upper bound on internal parallelism")


def _add_model(p):
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--model", help="SIR | SEIR | SEIAR (needs --s0/--i0/--n-pop)")
    for name in PARAM_FLAGS:
        p.add_argument(f"--{name.replace('_', '-')}", type=float, default=None)
    p.add_argument("--n-pop", type=int, default=None)
    for name in STATE_FLAGS:
        p.add_argument(f"--{name}", type=int, default=None)


def build_parser():
    parser = _Parser(prog="epichain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="stochastic ensemble with percentile bands")
    _add_common(p)
    _add_model(p)
    p.add_argument("--steps", type=int, default=201)
    p.add_argument("--trajectories", type=int, default=1000)
    p.add_argument("--band", choices=("quantile", "deviation"), default="quantile")
    p.add_argument("--save-trajectories", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate-measurements", help="deterministic infected series")
    _add_common(p)
    _add_model(p)
    p.add_argument("--steps", type=int, default=201)
    p.set_defaults(func=cmd_generate_measurements)

    p = sub.add_parser("infer", help="particle-filter Metropolis parameter chain")
    _add_common(p)
    _add_model(p)
    p.add_argument("--measurements", required=True)
    p.add_argument("--iterations", type=int, default=5000)
    p.add_argument("--particles", type=int, default=100)
    p.add_argument("--sigma", type=float, default=100.0)
    p.add_argument("--theta0-scale", type=float, default=2.0)
    p.add_argument("--theta0-p-scale", type=float, default=1.5)
    p.add_argument("--proposal-frac", type=float, default=0.1)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--ess-threshold", type=float, default=0.5)
    p.add_argument("--resample", default="systematic",
                   choices=("multinomial", "residual", "stratified", "systematic"))
    p.add_argument("--score", default="average", choices=("average", "logml"))
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("identify", help="FROLS term selection from a CSV dataset")
    _add_common(p)
    p.add_argument("--data", required=True,
                   help="CSV with candidate columns + 'y', or 'u' + 'y' with --volterra")
    p.add_argument("--volterra", action="store_true",
                   help="expand the raw 'u' column into Volterra candidates")
    p.add_argument("--max-lag", type=int, default=3)
    p.add_argument("--max-order", type=int, default=2)
    p.add_argument("--no-constant", action="store_true")
    p.add_argument("--rho", type=float, default=1e-6)
    p.add_argument("--max-terms", type=int, default=None)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("dist-check", help="analytic vs Monte-Carlo moment table")
    _add_common(p)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.set_defaults(func=cmd_dist_check)

    return parser


def _explicit_flags(argv):
    return {a.lstrip("-").replace("-", "_").split("=")[0] for a in argv if a.startswith("--")}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args._explicit = _explicit_flags(argv)
        _load_config_defaults(args, args.command)
        return args.func(args)
    except UsageError as exc:
        print(f"epichain: error: {exc}", file=sys.stderr)
        return 1
    except (DegenerateEnsembleError, RankDeficiencyError, DependentColumnError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"epichain: runtime error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"epichain: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
