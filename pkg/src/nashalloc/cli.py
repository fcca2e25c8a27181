"""Command-line interface.

Subcommands: clear (clearing payments), nash (allocation solvers), compare
(minimal / Nash / comonotonic-Nash table), sample (Gaussian-copula scenario
generation), check (verify a user-supplied allocation). Exit codes: 0 on
success, 2 on input or validation errors, 3 on solver failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import linprog, nash, risk
from .aggregation import AggregationSystem, EisenbergNoe, aggregator_from_json
from .errors import (
    BracketFailure,
    MaxIterations,
    NashAllocError,
    NonCoherentRiskMeasure,
    NonConvergence,
    NumericalBreakdown,
    ParseError,
)
from .network import load_network, self_preferential_bound
from .scenarios import (
    ScenarioSet,
    comonotonic_copula,
    gaussian_copula_sample,
    load_scenarios,
    save_scenarios,
)

SOLVER_ERRORS = (MaxIterations, NonConvergence, BracketFailure, NumericalBreakdown)
LP_SCENARIO_LIMIT = 500


class InputError(Exception):
    pass


@dataclass
class RunReport:
    """Machine-readable record of one CLI invocation."""

    command: str
    network_sha256: str = None
    scenario_count: int = None
    risk: str = None
    gamma: float = None
    lift: str = None
    rows: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_json(self, precision):
        def clean(obj):
            if isinstance(obj, float):
                return round(obj, precision)
            if isinstance(obj, dict):
                return {k: clean(v) for k, v in obj.items()}
            if isinstance(obj, list):
                return [clean(v) for v in obj]
            return obj

        return json.dumps(clean(asdict(self)), indent=2)


def _hash_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        digest.update(fh.read())
    return digest.hexdigest()


def _parse_vector(text, label):
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise InputError(f"bad {label} {text!r}: {exc}") from exc


def _fmt(v, precision):
    return f"{v:.{precision}f}"


def _report_row(report: nash.AllocationReport, method, precision, elapsed):
    return {
        "method": method,
        "m": [round(float(v), precision) for v in report.m],
        "rho_values": [round(float(v), precision) for v in report.rho_values],
        "residuals": [float(v) for v in report.residuals],
        "total": round(float(report.total), precision),
        "system_rho": float(report.system_rho),
        "system_acceptable": bool(report.system_acceptable),
        "iterations": int(report.iterations),
        "wall_time": round(elapsed, 4),
    }


def _print_allocation(report: nash.AllocationReport, names, precision, header):
    print(header)
    width = max(8, max(len(n) for n in names) + 2)
    print(f"  {'bank':<{width}}{'capital':>14}{'rho':>14}{'residual':>12}")
    for i, name in enumerate(names):
        print(
            f"  {name:<{width}}{_fmt(report.m[i], precision):>14}"
            f"{_fmt(report.rho_values[i], precision):>14}"
            f"{report.residuals[i]:>12.2e}"
        )
    print(
        f"  {'total':<{width}}{_fmt(report.total, precision):>14}"
        f"  system_acceptable={report.system_acceptable}"
    )


def _load_inputs(args, need_scenarios=True):
    net = None
    if getattr(args, "network", None):
        net = load_network(args.network)
    scen = None
    if getattr(args, "scenarios", None):
        scen = load_scenarios(args.scenarios)
    elif getattr(args, "deterministic", None):
        scen = ScenarioSet.deterministic(_parse_vector(args.deterministic, "--deterministic"))
    if need_scenarios and scen is None:
        raise InputError("provide --scenarios FILE or --deterministic X1,...,XN")
    if net is not None and scen is not None and net.n_banks != scen.n_banks:
        raise InputError(
            f"network has {net.n_banks} banks but scenarios have {scen.n_banks}"
        )
    return net, scen


def _resolve_aggregator(args, net, scen):
    text = getattr(args, "aggregator", None)
    n_banks = scen.n_banks if scen is not None else (net.n_banks if net else None)
    if text is None:
        if net is None:
            raise InputError("provide --network (clearing aggregation) or --aggregator")
        return EisenbergNoe(net=net, gamma=args.gamma)
    text = text.strip()
    if text.startswith("{"):
        doc = json.loads(text)
    elif text in ("mean_field", "identity_sum"):
        doc = {"kind": text, "n": n_banks}
        if text == "mean_field":
            doc["eps"] = args.eps
            doc["weight"] = args.mf_weight
    else:
        with open(text, encoding="utf-8") as fh:
            doc = json.load(fh)
    if doc.get("kind") == "eisenberg_noe" and "gamma" not in doc:
        doc["gamma"] = args.gamma
    return aggregator_from_json(doc, net=net, n_banks=n_banks)


def _solver_config(args):
    return nash.SolverConfig(
        outer_tol=args.outer_tol,
        inner_tol=args.inner_tol,
        max_outer=args.max_outer,
        damping=args.damping,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_clear(args):
    net, _ = _load_inputs(args, need_scenarios=False)
    if net is None:
        raise InputError("clear needs --network")
    assets = _parse_vector(args.assets, "--assets")
    from .clearing import clearing_vector, society_payment_components

    res = clearing_vector(net, assets)
    society = society_payment_components(net, assets, args.gamma)
    prec = args.precision
    print(f"clearing payments (gamma={args.gamma:g}):")
    width = max(8, max(len(n) for n in net.names) + 2)
    print(f"  {'bank':<{width}}{'payment':>14}{'default':>9}{'society_gap':>14}")
    for i, name in enumerate(net.names):
        print(
            f"  {name:<{width}}{_fmt(res.payments[i], prec):>14}"
            f"{str(bool(res.defaults[i])):>9}{_fmt(society[i], prec):>14}"
        )
    report = RunReport(
        command="clear",
        network_sha256=_hash_file(args.network),
        gamma=args.gamma,
        rows=[{
            "payments": [round(float(v), prec) for v in res.payments],
            "defaults": [bool(b) for b in res.defaults],
            "society_components": [round(float(v), prec) for v in society],
        }],
    )
    _emit_json(args, report)
    return 0


def _noncoherent_demo(args, scen, spec, precision):
    """Acceptability demo for a non-coherent measure on the additive aggregation.

    Uses per-bank components X_i + m_i and their sum, the classic structure
    where componentwise acceptability fails to aggregate.
    """
    m = np.zeros(scen.n_banks)
    if getattr(args, "capital", None):
        m = _parse_vector(args.capital, "--capital")
    components = scen.values + m[:, None]
    total = components.sum(axis=0)
    print(f"acceptability demo under {spec.label()} (no solve):")
    ok_all = True
    for i in range(scen.n_banks):
        r = risk.rho(spec, components[i], scen.probs)
        ok = r <= risk.ACCEPTABILITY_TOL
        ok_all &= ok
        print(f"  bank_{i + 1}: rho={_fmt(r, precision)} acceptable={ok}")
    r_sys = risk.rho(spec, total, scen.probs)
    sys_ok = r_sys <= risk.ACCEPTABILITY_TOL
    print(f"  system: rho={_fmt(r_sys, precision)} acceptable={sys_ok}")
    if ok_all and not sys_ok:
        print("  per-bank acceptability does not aggregate: coherence is required")
    return 0


def _run_nash(args, net, scen, aggregator, spec, cfg):
    lift = args.lift
    method = args.method
    sys_agg = AggregationSystem(base=aggregator, lift=lift)
    if method == "auto":
        if lift == "insensitive":
            method = "closed-form"
        elif isinstance(aggregator, EisenbergNoe) and scen.n_scenarios == 1:
            method = "exact"
        else:
            method = "fixed-point"
    if method == "lp" and not isinstance(aggregator, EisenbergNoe):
        raise InputError("--method lp applies to the clearing aggregation only")
    if method == "exact" and not (
        isinstance(aggregator, EisenbergNoe) and scen.n_scenarios == 1
    ):
        raise InputError(
            "--method exact needs the clearing aggregation and a deterministic shock"
        )

    if method == "closed-form":
        report = nash.nash_insensitive(scen, aggregator, spec, cfg)
    elif method == "exact":
        report = nash.nash_deterministic_en(
            net, scen.values[:, 0], aggregator.gamma, spec, cfg
        )
    elif method == "lp":
        report = linprog.nash_lp_en(net, scen, spec, aggregator.gamma, cfg)
        if args.dump_lp:
            program = linprog._en_program(net, scen, spec, aggregator.gamma, True)
            with open(args.dump_lp, "w", encoding="utf-8") as fh:
                fh.write(linprog.format_lp(program) + "\n")
    else:
        report = nash.nash_fixed_point(scen, sys_agg, spec, cfg)
    return report


def cmd_nash(args):
    net, scen = _load_inputs(args)
    spec = risk.parse_risk_spec(args.risk)
    prec = args.precision
    if not spec.coherent:
        if not args.allow_noncoherent:
            raise InputError(
                f"{spec.label()} is not coherent; pass --allow-noncoherent for the "
                "acceptability demo (no solve)"
            )
        return _noncoherent_demo(args, scen, spec, prec)
    aggregator = _resolve_aggregator(args, net, scen)
    cfg = _solver_config(args)
    t0 = time.perf_counter()
    report = _run_nash(args, net, scen, aggregator, spec, cfg)
    elapsed = time.perf_counter() - t0
    names = net.names if net else [f"bank_{i + 1}" for i in range(scen.n_banks)]
    _print_allocation(report, names, prec, f"nash allocation ({report.method}):")
    run = RunReport(
        command="nash",
        network_sha256=_hash_file(args.network) if args.network else None,
        scenario_count=scen.n_scenarios,
        risk=spec.label(),
        gamma=args.gamma if net else None,
        lift=args.lift,
        rows=[_report_row(report, report.method, prec, elapsed)],
        timings={"solve": round(elapsed, 4)},
    )
    _emit_json(args, run)
    return 0


def cmd_check(args):
    net, scen = _load_inputs(args)
    spec = risk.parse_risk_spec(args.risk)
    if not spec.coherent:
        raise InputError("check requires a coherent risk measure")
    aggregator = _resolve_aggregator(args, net, scen)
    cfg = _solver_config(args)
    m = _parse_vector(args.capital, "--capital")
    sys_agg = AggregationSystem(base=aggregator, lift=args.lift)
    report = nash.verify_nash(m, scen, sys_agg, spec, cfg)
    names = net.names if net else [f"bank_{i + 1}" for i in range(scen.n_banks)]
    prec = args.precision
    _print_allocation(report, names, prec, "verification of supplied allocation:")
    max_resid = float(report.residuals.max())
    print(f"  max residual {max_resid:.3e}")
    run = RunReport(
        command="check",
        network_sha256=_hash_file(args.network) if args.network else None,
        scenario_count=scen.n_scenarios,
        risk=spec.label(),
        lift=args.lift,
        rows=[_report_row(report, "verify", prec, 0.0)],
    )
    _emit_json(args, run)
    return 0


def cmd_sample(args):
    net, _ = _load_inputs(args, need_scenarios=False)
    if args.n < 1:
        raise InputError(f"--n must be positive, got {args.n}")
    if args.scales:
        scales = _parse_vector(args.scales, "--scales")
    elif net is not None:
        scales = net.total_obligations
    else:
        raise InputError("provide --scales or --network for the per-bank scales")
    dim = scales.shape[0]
    corr_text = args.corr
    try:
        off = float(corr_text)
        corr = np.full((dim, dim), off)
        np.fill_diagonal(corr, 1.0)
    except ValueError:
        corr = np.array(json.loads(corr_text), dtype=float)
    scen = gaussian_copula_sample(corr, scales, args.n, args.seed)
    save_scenarios(scen, args.out)
    print(f"wrote {scen.n_scenarios} scenarios for {dim} banks to {args.out}")
    return 0


def _insensitive_rows(net, scen, copula, spec, gamma, prec, rows, names):
    base = EisenbergNoe(net=net, gamma=gamma)
    y_total = AggregationSystem(base=base, lift="insensitive").eval_total(scen, np.zeros(net.n_banks))
    t0 = time.perf_counter()
    minimal_total = float(risk.rho(spec, y_total, scen.probs))
    rows.append({
        "lift": "insensitive", "method": "minimal", "m": None,
        "total": round(minimal_total, prec),
        "system_acceptable": True,
        "wall_time": round(time.perf_counter() - t0, 4),
    })
    t0 = time.perf_counter()
    rep = nash.nash_insensitive(scen, base, spec)
    row = _report_row(rep, "nash", prec, time.perf_counter() - t0)
    row["lift"] = "insensitive"
    rows.append(row)
    t0 = time.perf_counter()
    rep_z = nash.nash_insensitive(copula, base, spec)
    # acceptability of the copula allocation re-checked under the original law
    sys_rho = float(risk.rho(spec, y_total, scen.probs)) - float(rep_z.m.sum())
    row = _report_row(rep_z, "comonotonic", prec, time.perf_counter() - t0)
    row["lift"] = "insensitive"
    row["system_rho"] = sys_rho
    row["system_acceptable"] = bool(sys_rho <= 1e-7)
    rows.append(row)
    return rows


def _sensitive_rows(net, scen, copula, spec, gamma, cfg, method, prec, rows):
    base = EisenbergNoe(net=net, gamma=gamma)
    sys_agg = AggregationSystem(base=base, lift="sensitive")
    t0 = time.perf_counter()
    m_min, total_min = linprog.minimal_capital_en(net, scen, spec, gamma)
    sys_rho = float(risk.rho(spec, sys_agg.eval_total(scen, m_min), scen.probs))
    rows.append({
        "lift": "sensitive", "method": "minimal",
        "m": [round(float(v), prec) for v in m_min],
        "total": round(total_min, prec),
        "system_rho": sys_rho,
        "system_acceptable": bool(sys_rho <= 1e-7),
        "wall_time": round(time.perf_counter() - t0, 4),
    })
    use_lp = method == "lp" or (method == "auto" and scen.n_scenarios <= LP_SCENARIO_LIMIT)
    t0 = time.perf_counter()
    if use_lp:
        rep = linprog.nash_lp_en(net, scen, spec, gamma, cfg)
    else:
        rep = nash.nash_fixed_point(scen, sys_agg, spec, cfg)
    row = _report_row(rep, "nash", prec, time.perf_counter() - t0)
    row["lift"] = "sensitive"
    rows.append(row)
    t0 = time.perf_counter()
    rep_z = nash.nash_fixed_point(copula, AggregationSystem(base=base, lift="sensitive"), spec, cfg)
    # re-check the copula allocation under the original joint law
    sys_rho_z = float(risk.rho(spec, sys_agg.eval_total(scen, rep_z.m), scen.probs))
    row = _report_row(rep_z, "comonotonic", prec, time.perf_counter() - t0)
    row["lift"] = "sensitive"
    row["system_rho"] = sys_rho_z
    row["system_acceptable"] = bool(sys_rho_z <= 1e-7)
    rows.append(row)
    return rows


def cmd_compare(args):
    net, scen = _load_inputs(args)
    if net is None:
        raise InputError("compare needs --network")
    spec = risk.parse_risk_spec(args.risk)
    if spec.kind not in ("expectation", "avar"):
        raise InputError("compare supports expectation or avar risk measures")
    cfg = _solver_config(args)
    prec = args.precision
    copula = comonotonic_copula(scen)
    rows = []
    t_start = time.perf_counter()
    if args.lift in ("insensitive", "both"):
        _insensitive_rows(net, scen, copula, spec, args.gamma, prec, rows, net.names)
    if args.lift in ("sensitive", "both"):
        _sensitive_rows(net, scen, copula, spec, args.gamma, cfg, args.method, prec, rows)

    print(f"capital comparison  risk={spec.label()}  gamma={args.gamma:g}  "
          f"scenarios={scen.n_scenarios}")
    header = f"  {'lift':<13}{'method':<13}" + "".join(
        f"{n:>12}" for n in net.names
    ) + f"{'total':>12}  ok"
    print(header)
    for row in rows:
        cells = (
            "".join(f"{_fmt(v, prec):>12}" for v in row["m"])
            if row["m"] is not None
            else "".join(f"{'-':>12}" for _ in net.names)
        )
        print(
            f"  {row['lift']:<13}{row['method']:<13}{cells}"
            f"{_fmt(row['total'], prec):>12}  {row['system_acceptable']}"
        )

    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("lift,method," + ",".join(net.names) + ",total,system_acceptable\n")
            for row in rows:
                cells = (
                    ",".join(_fmt(v, prec) for v in row["m"])
                    if row["m"] is not None
                    else "," * (net.n_banks - 1)
                )
                fh.write(
                    f"{row['lift']},{row['method']},{cells},"
                    f"{_fmt(row['total'], prec)},{row['system_acceptable']}\n"
                )
    run = RunReport(
        command="compare",
        network_sha256=_hash_file(args.network),
        scenario_count=scen.n_scenarios,
        risk=spec.label(),
        gamma=args.gamma,
        lift=args.lift,
        rows=rows,
        timings={"total": round(time.perf_counter() - t_start, 4)},
    )
    _emit_json(args, run)
    return 0


def _emit_json(args, report: RunReport):
    if getattr(args, "json", None):
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(report.to_json(args.precision) + "\n")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(p, scenarios=True, lift_choices=("sensitive", "insensitive"),
                lift_default="sensitive"):
    p.add_argument("--network", help="network JSON file")
    p.add_argument("--gamma", type=float, default=0.95,
                   help="required repaid fraction of society obligations")
    if scenarios:
        p.add_argument("--scenarios", help="scenario CSV file")
        p.add_argument("--deterministic", help="comma-separated deterministic shock")
        p.add_argument("--aggregator",
                       help="aggregator JSON (inline, file, or kind shorthand)")
        p.add_argument("--risk", default="expectation",
                       help="expectation | avar:A | oce:G1:G2 | entropic:T")
        p.add_argument("--lift", choices=list(lift_choices), default=lift_default)
        p.add_argument("--eps", type=float, default=0.1,
                       help="shift for mean_field shorthand utilities")
        p.add_argument("--mf-weight", type=float, default=1.0,
                       help="externality weight for mean_field shorthand")
        p.add_argument("--outer-tol", type=float, default=1e-8)
        p.add_argument("--inner-tol", type=float, default=1e-10)
        p.add_argument("--max-outer", type=int, default=10000)
        p.add_argument("--damping", type=float, default=1.0)
    p.add_argument("--precision", type=int, default=6)
    p.add_argument("--json", help="write a JSON report to this path")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="nashalloc",
        description="Nash capital allocations for systemic risk measures",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clear", help="clearing payments for an asset vector")
    p.add_argument("--assets", required=True, help="comma-separated asset vector")
    _add_common(p, scenarios=False)

    p = sub.add_parser("nash", help="solve for a Nash allocation")
    p.add_argument("--method", choices=["auto", "fixed-point", "lp", "exact"],
                   default="auto")
    p.add_argument("--allow-noncoherent", action="store_true",
                   help="run the acceptability demo for non-coherent measures")
    p.add_argument("--capital", help="capital vector for the acceptability demo")
    p.add_argument("--dump-lp", help="write the LP in plain text to this path")
    _add_common(p)

    p = sub.add_parser("compare", help="minimal / Nash / comonotonic comparison")
    p.add_argument("--method", choices=["auto", "fixed-point", "lp"], default="auto")
    p.add_argument("--csv", help="write the comparison table as CSV")
    _add_common(p, lift_choices=("sensitive", "insensitive", "both"),
                lift_default="both")

    p = sub.add_parser("sample", help="generate Gaussian-copula scenarios")
    p.add_argument("--corr", required=True,
                   help="off-diagonal correlation or a JSON matrix")
    p.add_argument("--scales", help="comma-separated per-bank scales")
    p.add_argument("--n", type=int, required=True, help="sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    _add_common(p, scenarios=False)

    p = sub.add_parser("check", help="verify a supplied allocation")
    p.add_argument("--capital", required=True, help="comma-separated capital vector")
    _add_common(p)
    return ap


HANDLERS = {
    "clear": cmd_clear,
    "nash": cmd_nash,
    "compare": cmd_compare,
    "sample": cmd_sample,
    "check": cmd_check,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return HANDLERS[args.command](args)
    except (InputError, ParseError, NonCoherentRiskMeasure, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SOLVER_ERRORS as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        if isinstance(exc, MaxIterations) and exc.report is not None:
            print(
                f"best residual {float(np.max(exc.report.residuals)):.3e} "
                f"at m={exc.report.m.tolist()}",
                file=sys.stderr,
            )
        return 3
    except NashAllocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
