"""Command-line front end.

Verbs: ``criteria``, ``audit``, ``experiment``, ``example`` and ``validate``.
Exit status is 0 on success, 2 for bad input and 3 when a model exceeds the
inference capacity.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .experiments import MAX_OPTIMA, ExampleId, ExperimentConfig, itv_incidence, load_example
from .graph import (GraphError, SLGraph, directed_paths_via, format_path, itv_criterion,
                    padmissible_extra_condition, padmissible_itv_criterion, psie_criterion)
from .metrics import classify, fairness_report, itv_from_joint, psie_details
from .modelfile import dumps_model, load_graph, load_model, save_model
from .policy import Policy, expected_utility, solve
from .scm import (DEFAULT_CAPACITY, CapacityError, LossSpec, ModelError, StructuralModel,
                  UndefinedConditionalError, check_capacity, joint_distribution)

EXIT_OK, EXIT_INPUT, EXIT_CAPACITY = 0, 2, 3


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# report sections


def criteria_section(graph: SLGraph, padmissible: bool = False, psie_via: list[str] | None = None) -> dict:
    t1 = itv_criterion(graph)
    out = {"theorem1": {"satisfied": t1.satisfied, "feature": t1.feature,
                        "path": format_path(graph, t1.path) if t1.path else None}}
    if padmissible:
        feats = set(graph.features)
        out["theorem2"] = {"satisfied": padmissible_itv_criterion(graph),
                           "itv_criterion": t1.satisfied,
                           "sensitive_is_feature": graph.sensitive in feats,
                           "extra_condition": padmissible_extra_condition(graph)}
    for node in psie_via or ():
        sub = directed_paths_via(graph, node)
        t3 = psie_criterion(graph, sub)
        out.setdefault("theorem3", []).append(
            {"via": node, "satisfied": t3.satisfied, "feature": t3.feature,
             "path": format_path(graph, t3.path) if t3.path else None,
             "edges": [list(e) for e in sub]})
    return out


def policy_rows(policy: Policy) -> list[dict]:
    return [{"features": dict(zip(policy.features, row)), "prediction": value,
             "reachable": row not in policy.unreachable}
            for row, value in policy.table.items()]


def prepare_model(model: StructuralModel, loss_kind: str | None) -> StructuralModel:
    """Apply a loss override and give the prediction node a domain fit for that loss."""
    if loss_kind is not None:
        if loss_kind == "table" and model.loss.kind != "table":
            raise InputError("--loss table needs a loss table in the model file")
        if loss_kind != model.loss.kind:
            model = model.with_loss(LossSpec(loss_kind))
    if model.loss.kind == "mse":
        return model.with_prediction_domain(())
    if not model.prediction_domain:
        return model.with_prediction_domain(model.domains[model.graph.target])
    return model


def audit_report(model: StructuralModel, tolerance: float, psie_via=(), all_optima: bool = False) -> dict:
    g = model.graph
    if model.groups is None:
        raise InputError("the model file needs 'groups' with a0 and a1 to audit")
    for role in (g.target,):
        if not all(isinstance(v, (int, float)) for v in model.domains[role]):
            raise InputError("the target must have a numeric domain to audit total variation")
    policies = solve(model, tol=tolerance)
    if len(policies) == 0:
        raise InputError("no optimal policy found")
    chosen = policies[0]
    report = fairness_report(model, chosen, model.groups, eps=tolerance, tol=tolerance)
    out = {
        "loss": model.loss.kind,
        "n_optimal_policies": len(policies),
        "policy": policy_rows(chosen),
        "expected_utility": expected_utility(model, chosen),
        "fairness": report.to_dict(),
        "criteria": criteria_section(g, padmissible=True, psie_via=list(psie_via)),
    }
    if all_optima:
        if len(policies) > MAX_OPTIMA:
            raise CapacityError(f"{len(policies)} optimal policies exceed {MAX_OPTIMA}")
        values = [itv_from_joint(joint_distribution(model, p), model.groups) for p in policies]
        out["all_optima"] = {"count": len(values), "itv_min": min(values), "itv_max": max(values),
                             "classification_min": classify(min(values), tolerance).value,
                             "policies": [policy_rows(p) for p in policies]}
    entries = []
    for node in psie_via:
        sub = directed_paths_via(g, node)
        res = psie_details(model, chosen, sub, model.groups)
        entries.append({"via": node, "psie": res.value, "pse_prediction": res.pse_prediction,
                        "pse_target": res.pse_target, "coupling_dependent": res.coupling_dependent})
    if entries:
        out["psie"] = entries
    return out


def provenance(args) -> dict:
    return {"tool": "itv-audit", "version": __version__, "seed": args.seed, "tolerance": args.tolerance,
            "capacity": args.capacity}


# ---------------------------------------------------------------------------
# text rendering


def _num(x) -> str:
    if isinstance(x, float):
        return format(x + 0.0 if abs(x) > 1e-15 else 0.0, ".10g")
    return str(x)


def _verdict(ok: bool) -> str:
    return "SATISFIED" if ok else "NOT satisfied"


def render_criteria(section: dict) -> list[str]:
    t1 = section["theorem1"]
    lines = [f"Theorem 1: {_verdict(t1['satisfied'])}" + (f" (W={t1['feature']})" if t1["satisfied"] else "")]
    if t1["path"]:
        lines.append(f"  path: {t1['path']}")
    if "theorem2" in section:
        t2 = section["theorem2"]
        lines.append(f"Theorem 2: {_verdict(t2['satisfied'])}")
        if not t2["satisfied"] and t2["itv_criterion"]:
            reason = "A is a feature" if t2["sensitive_is_feature"] else "A is d-separated from U given the features"
            lines.append(f"  reason: {reason}")
    for t3 in section.get("theorem3", []):
        head = f"Theorem 3 (via {t3['via']}): {_verdict(t3['satisfied'])}"
        lines.append(head + (f" (W={t3['feature']})" if t3["satisfied"] else ""))
        if t3["path"]:
            lines.append(f"  path: {t3['path']}")
    return lines


def render_audit(rep: dict) -> list[str]:
    f = rep["fairness"]
    lines = [f"loss: {rep['loss']} ({rep['n_optimal_policies']} optimal polic"
             f"{'y' if rep['n_optimal_policies'] == 1 else 'ies'})", "policy:"]
    for row in rep["policy"]:
        feats = ", ".join(f"{k}={v}" for k, v in row["features"].items()) or "(no features)"
        tag = "" if row["reachable"] else "  [unreachable]"
        lines.append(f"  {feats} -> {_num(row['prediction'])}{tag}")
    lines += [
        f"expected utility: {_num(rep['expected_utility'])}",
        f"ATV(Y): {_num(f['atv_y'])}",
        f"ATV(Yhat): {_num(f['atv_yhat'])}",
        f"ITV: {_num(f['itv'])} ({f['classification']})",
        f"separation: {'holds' if f['separation'] else 'fails'} (gap {_num(f['separation_gap'])} bits)",
        f"sufficiency: {'holds' if f['sufficiency'] else 'fails'} (gap {_num(f['sufficiency_gap'])} bits)",
        f"IMI: {_num(f['imi'])} bits (independence gap {_num(f['independence_gap'])}, legacy {_num(f['legacy'])})",
    ]
    if "all_optima" in rep:
        a = rep["all_optima"]
        lines.append(f"all optima: {a['count']} policies, ITV min {_num(a['itv_min'])}, max {_num(a['itv_max'])}")
    for e in rep.get("psie", []):
        flag = "  [depends on noise coupling]" if e["coupling_dependent"] else ""
        lines.append(f"PSIE via {e['via']}: {_num(e['psie'])} (PSE(Yhat) {_num(e['pse_prediction'])}, "
                     f"PSE(Y) {_num(e['pse_target'])}){flag}")
    lines += render_criteria(rep["criteria"])
    return lines


def emit(args, payload: dict, lines: list[str]) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))
    else:
        print("\n".join(lines))


# ---------------------------------------------------------------------------
# verbs


def _is_graph_only(path: str) -> bool:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return not any("spec" in n for n in data.get("nodes", []) if isinstance(n, dict)
                   and n.get("role") not in ("prediction", "utility"))


def cmd_criteria(args) -> int:
    graph = load_graph(args.file)
    section = criteria_section(graph, args.padmissible, args.psie_via)
    emit(args, {"criteria": section, "provenance": provenance(args)}, render_criteria(section))
    return EXIT_OK


def _audit(args, model: StructuralModel, loss_kind, psie_via, all_optima) -> int:
    check_capacity(model, args.capacity)
    model = prepare_model(model, loss_kind)
    rep = audit_report(model, args.tolerance, psie_via or (), all_optima)
    rep["provenance"] = provenance(args)
    emit(args, rep, render_audit(rep))
    return EXIT_OK


def cmd_audit(args) -> int:
    return _audit(args, load_model(args.file), args.loss, args.psie_via, args.all_optima)


def cmd_experiment(args) -> int:
    try:
        config = ExperimentConfig(n_samples=args.samples, n_nodes=args.nodes, edge_prob=args.edge_prob,
                                  dirichlet_alpha=args.alpha, domain_size=args.domain_size, loss=args.loss,
                                  criterion=args.criterion, itv_threshold=args.threshold, seed=args.seed,
                                  max_attempts=args.max_attempts, workers=args.workers)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    result = itv_incidence(config)
    summary = result.summary()
    summary["provenance"] = provenance(args)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"summary": summary}, sort_keys=True) + "\n")
            for r in result.records:
                fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")
    lines = [f"criterion: {config.effective_criterion}, loss: {config.loss}, seed: {config.seed}",
             f"models satisfying the criterion: {result.n_satisfying_criterion} (skipped {result.n_skipped})",
             f"ITV > {config.itv_threshold}: {result.n_with_itv_above_threshold}",
             f"fraction: {_num(result.fraction)}"]
    emit(args, summary, lines)
    return EXIT_OK


def cmd_example(args) -> int:
    model, _, _ = load_example(args.id)
    if args.emit_model:
        save_model(model, args.emit_model)
        if args.format == "json":
            print(json.dumps({"written": args.emit_model}))
        else:
            print(f"wrote {args.emit_model}")
        return EXIT_OK
    if args.run:
        via = args.psie_via
        if via is None:
            via = ["Degree"] if "Degree" in model.graph.nodes else []
        return _audit(args, model, None, via, args.all_optima)
    sys.stdout.write(dumps_model(model))
    return EXIT_OK


def cmd_validate(args) -> int:
    graph = load_graph(args.file)
    if _is_graph_only(args.file):
        msg = f"{args.file}: OK (graph with {len(graph.nodes)} nodes, no parameters)"
    else:
        model = load_model(args.file)
        msg = f"{args.file}: OK ({len(model.graph.nodes)} nodes, {model.exogenous_states()} exogenous states)"
    emit(args, {"valid": True, "file": args.file}, [msg])
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _add_common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    def d(v):
        return argparse.SUPPRESS if suppress else v
    parser.add_argument("--tolerance", type=float, default=d(1e-9),
                        help="tie, classification and independence tolerance (default 1e-9)")
    parser.add_argument("--capacity", type=_positive_int, default=d(DEFAULT_CAPACITY),
                        help="maximum number of joint exogenous states")
    parser.add_argument("--seed", type=_seed, default=d(0), help="random seed (unsigned 64-bit)")
    parser.add_argument("--format", choices=("json", "text"), default=d("text"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="itv-audit",
                                     description="Audit introduced total variation in SL graphs and models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_common(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _add_common(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("criteria", parents=[common], help="graphical criteria for a model or graph file")
    p.add_argument("file")
    p.add_argument("--padmissible", action="store_true", help="also check the P-admissible criterion")
    p.add_argument("--psie-via", action="append", metavar="NODE", help="check the PSIE criterion via NODE")
    p.set_defaults(func=cmd_criteria)

    p = sub.add_parser("audit", parents=[common], help="solve the optimal policy and report fairness measures")
    p.add_argument("file")
    p.add_argument("--loss", choices=("zero_one", "mse", "table"))
    p.add_argument("--psie-via", action="append", metavar="NODE")
    p.add_argument("--all-optima", action="store_true", help="report ITV range over every optimal policy")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("experiment", parents=[common], help="incidence of ITV among random models")
    defaults = ExperimentConfig()
    p.add_argument("--samples", type=int, default=defaults.n_samples)
    p.add_argument("--nodes", type=int, default=defaults.n_nodes, help="total nodes, Ŷ and U included")
    p.add_argument("--edge-prob", type=float, default=defaults.edge_prob)
    p.add_argument("--alpha", type=float, default=defaults.dirichlet_alpha)
    p.add_argument("--domain-size", type=int, default=defaults.domain_size)
    p.add_argument("--loss", choices=("zero_one", "mse"), default=defaults.loss)
    p.add_argument("--criterion", choices=("theorem1", "theorem2", "not_theorem1", "not_theorem2_extra", "none"))
    p.add_argument("--threshold", type=float, default=defaults.itv_threshold)
    p.add_argument("--max-attempts", type=int, default=defaults.max_attempts)
    p.add_argument("--workers", type=int, default=int(os.environ.get("ITV_AUDIT_THREADS", "1") or 1))
    p.add_argument("--out", help="write summary and per-sample records (JSON lines)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("example", parents=[common], help="emit or audit a worked example")
    p.add_argument("id", choices=[e.value for e in ExampleId])
    group = p.add_mutually_exclusive_group()
    group.add_argument("--emit-model", metavar="PATH")
    group.add_argument("--run", action="store_true")
    p.add_argument("--psie-via", action="append", metavar="NODE")
    p.add_argument("--all-optima", action="store_true")
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("validate", parents=[common], help="check that a model or graph file is well formed")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (InputError, ModelError, GraphError, UndefinedConditionalError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
