"""Command-line interface: ``fit``, ``simulate``, ``identifiability`` and ``gof``.

Exit status is 0 on success, 2 on usage or input errors and 1 on
numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings

import numpy as np

from .datasets import builtin_dataset, simulate_design
from .gof import DF_CONVENTIONS, STATISTICS, gof_test, lrt_test, top_expected_counts
from .identifiability import (
    OutOfFamilyError,
    ParameterMask,
    check_assumptions,
    example2_mixture,
    example4_mixture,
    family_example2,
    family_example4,
    fisher_information,
    local_identifiability_test,
    verify_equal_distribution,
)
from .model import DimensionError, DomainError, IsingParams, MixtureParams, n_pairs, pair_index
from .optimize import ConvergenceError, fit_mle
from .prior import PriorConfig
from .report import AnalysisReport, export_graph
from .sampler import DegenerateWeightsError, posterior_gamma_ising, posterior_mixture
from .tableio import read_table, serialize_table

logger = logging.getLogger(__name__)

BUILTIN = ("rochdale", "nltcs")


class UsageError(Exception):
    pass


def _load_data(source: str, d: int | None, order: str):
    if source.lower() in BUILTIN:
        table = builtin_dataset(source)
        if d is not None and d != table.d:
            raise UsageError(f"{source} has d={table.d}, got --d {d}")
        return table
    try:
        return read_table(source, d, order)
    except OSError as exc:
        raise UsageError(f"cannot read {source}: {exc}") from exc


def _input_descriptor(source: str, table) -> dict:
    return {"source": source, "d": table.d, "N": table.N}


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _prior_from_args(args) -> PriorConfig:
    return PriorConfig(args.sigma0, args.sigma1, args.beta, args.alpha)


def _cmd_fit(args) -> int:
    table = _load_data(args.data, args.d, args.order)
    prior = _prior_from_args(args)
    if args.K == 1:
        summary = posterior_gamma_ising(table, prior, args.M, args.seed, args.R, n_jobs=args.jobs)
    else:
        summary = posterior_mixture(table, prior, args.K, args.shared_main, args.J, args.M,
                                    args.R, args.seed, n_jobs=args.jobs)
    settings = {"K": args.K, "shared_main": bool(args.shared_main or args.K == 1),
                "prior": prior.to_dict(), "J": args.J, "M": args.M, "R": args.R,
                "seed": args.seed}
    report = AnalysisReport.from_summary("fit", _input_descriptor(args.data, table), settings,
                                         summary, args.tau)
    _write(args.out, report.to_json())
    if args.dot:
        for k in range(summary.K):
            _write(f"{args.dot}_component{k + 1}.dot", export_graph(summary, k, args.tau))
    return 0


def _cmd_simulate(args) -> int:
    if args.N < 1:
        raise UsageError("--N must be at least 1")
    table, truth = simulate_design(args.design, args.N, args.sampled, args.seed)
    kind = "multinomial draw" if args.sampled else "fixed N*p table"
    header = f"design {args.design.upper()}, N={args.N}, {kind}, seed={args.seed}"
    _write(args.out, serialize_table(table, header=header))
    return 0


def _cmd_gof(args) -> int:
    table = _load_data(args.data, args.d, args.order)
    conv = {"statistic": args.statistic, "df_convention": args.df_convention}
    null = fit_mle(table, 1)
    fits = {"ising": null.params}
    gof = {"ising": {**gof_test(table, null, **conv).to_dict(), "diverged": null.diverged}}
    lrt = None
    if args.K >= 2:
        alt = fit_mle(table, args.K, args.shared_main, args.J, args.seed)
        fits["mixture"] = alt.params
        gof["mixture"] = {**gof_test(table, alt, **conv).to_dict(), "diverged": alt.diverged,
                          "weights": alt.params.weights.tolist()}
        lrt = lrt_test(table, null, alt).to_dict()
    settings = {"K": args.K, "shared_main": bool(args.shared_main), "J": args.J,
                "seed": args.seed, **conv}
    report = AnalysisReport("gof", _input_descriptor(args.data, table), settings, gof=gof,
                            lrt=lrt, expected_counts=top_expected_counts(table, fits))
    _write(args.out, report.to_json())
    return 0


def _component_from_spec(d: int, spec: dict) -> IsingParams:
    main = np.asarray(spec.get("main", np.zeros(d)), dtype=float)
    if "inter" in spec:
        return IsingParams(main, np.asarray(spec["inter"], dtype=float))
    pairs = {}
    for key, val in spec.get("pairs", {}).items():
        a, b = (int(t) for t in key.replace("(", "").replace(")", "").split(","))
        pairs[(a, b)] = float(val)
    return IsingParams.from_pairs(d, pairs, main)


def model_from_spec(spec: dict) -> tuple[MixtureParams, ParameterMask, float]:
    """Parameters, mask and rank tolerance from an ``identifiability`` JSON spec.

    Components give ``main`` plus either a full ``inter`` vector or
    ``pairs`` mapping ``"a,b"`` (one-based) to values.  The mask gives
    ``free_weights``, ``free_main`` and either ``free_inter`` (K rows of
    0/1) or ``free_pairs`` (a list of one-based pairs per component).
    """
    d = int(spec["d"])
    comps = tuple(_component_from_spec(d, c) for c in spec["components"])
    K = len(comps)
    weights = np.asarray(spec.get("weights", np.full(K, 1.0 / K)), dtype=float)
    params = MixtureParams(weights, comps, bool(spec.get("shared_main", True)))
    m = spec.get("mask", {})
    if "free_inter" in m:
        inter = np.asarray(m["free_inter"], dtype=bool)
    else:
        inter = np.zeros((K, n_pairs(d)), bool)
        for k, pairs in enumerate(m.get("free_pairs", [[] for _ in range(K)])):
            for a, b in pairs:
                inter[k, pair_index(a - 1, b - 1, d)] = True
    mask = ParameterMask(bool(m.get("free_weights", False)), inter,
                         np.asarray(m.get("free_main", np.zeros(d)), dtype=bool))
    return params, mask, float(spec.get("tol", 1e-8))


def _only_pairs(theta: IsingParams, allowed: set[int]) -> bool:
    return all(i in allowed or theta.inter[i] == 0 for i in range(theta.inter.size))


def _family_check(params: MixtureParams, mask: ParameterMask) -> dict | None:
    """Run the matching closed-form family over a grid of alternative weights."""
    if params.K != 2 or not mask.free_weights or np.any(mask.free_main):
        return None
    if any(np.any(c.main != 0) for c in params.components):
        return None
    grid = np.linspace(0.05, 0.95, 19)
    w1 = float(params.weights[0])
    c1, c2 = params.components
    d = params.d
    i12 = pair_index(0, 1, d)
    diffs, used = [], []
    if d == 2 and c2.inter[0] == 0 and mask.free_inter[0, 0] and not mask.free_inter[1, 0]:
        name = "two-variable, one independent component"
        for wa in grid:
            try:
                t, w = family_example2(c1.inter[0], w1, wa)
            except OutOfFamilyError:
                continue
            diffs.append(verify_equal_distribution(params, example2_mixture(t, w)))
            used.append(float(wa))
    elif d == 4:
        i34 = pair_index(2, 3, d)
        expected = np.zeros((2, n_pairs(d)), bool)
        expected[0, i12] = expected[1, i34] = True
        if not (_only_pairs(c1, {i12}) and _only_pairs(c2, {i34})
                and np.array_equal(mask.free_inter, expected)):
            return None
        name = "four-variable, disjoint activation, free weight"
        for wa in grid:
            try:
                a, b, w = family_example4(c1.inter[i12], c2.inter[i34], w1, wa)
            except OutOfFamilyError:
                continue
            diffs.append(verify_equal_distribution(params, example4_mixture(a, b, w)))
            used.append(float(wa))
    else:
        return None
    return {"family": name, "w_alt": used, "max_abs_difference": max(diffs) if diffs else None}


def _cmd_identifiability(args) -> int:
    try:
        with open(args.spec, encoding="utf-8") as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read spec {args.spec}: {exc}") from exc
    try:
        params, mask, tol = model_from_spec(spec)
    except KeyError as exc:
        raise UsageError(f"spec is missing {exc}") from exc
    result = local_identifiability_test(params, mask, tol)
    payload = {"fisher_information": fisher_information(params, mask),
               "rank_test": result.to_dict(),
               "assumptions": check_assumptions(params, mask).to_dict(),
               "family": _family_check(params, mask), "mask": mask.to_dict()}
    report = AnalysisReport("identifiability", {"source": args.spec, "d": params.d, "N": None},
                            {"K": params.K, "shared_main": params.shared_main, "tol": tol},
                            identifiability=payload)
    _write(args.out, report.to_json())
    return 0


def _add_data_args(p) -> None:
    p.add_argument("--data", required=True, help="table file, 'rochdale' or 'nltcs'")
    p.add_argument("--d", type=int, default=None, help="number of variables (inferred if omitted)")
    p.add_argument("--order", choices=("last", "first"), default="last",
                   help="which variable varies fastest in the file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isingmix", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="posterior inclusion probabilities by importance sampling")
    _add_data_args(p)
    p.add_argument("--K", type=int, default=1)
    p.add_argument("--shared-main", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--sigma0", type=float, default=0.1)
    p.add_argument("--sigma1", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--M", type=int, default=100_000)
    p.add_argument("--R", type=int, default=100)
    p.add_argument("--J", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--jobs", type=int, default=1, help="threads for replicates")
    p.add_argument("--out", default=None)
    p.add_argument("--dot", default=None, help="prefix for one DOT file per component")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("simulate", help="table from a simulation design")
    p.add_argument("--design", required=True, type=str.upper, choices=("A", "B", "C", "D"))
    p.add_argument("--N", type=int, default=10_000)
    p.add_argument("--sampled", action="store_true", help="multinomial draw instead of N*p")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("identifiability", help="Fisher-information rank and assumption checks")
    p.add_argument("--spec", required=True, help="model JSON (parameters and mask)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_identifiability)

    p = sub.add_parser("gof", help="maximum likelihood fits, goodness of fit, LRT")
    _add_data_args(p)
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--shared-main", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--J", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--statistic", choices=STATISTICS, default="deviance")
    p.add_argument("--df-convention", choices=DF_CONVENTIONS, default="model")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_gof)
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore", RuntimeWarning)
            return args.func(args)
    except (UsageError, DomainError, DimensionError, KeyError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, DegenerateWeightsError, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())
