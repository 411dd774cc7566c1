#!/usr/bin/env python3
"""The gen, solve, verify and bench subcommands. Each returns the exit code;
errors travel as MaxMinError and the entry script maps them."""

import json
import os
import time
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Set, Tuple

from models.instance import Allocation, Instance
from models.layered import InfeasibilityCertificate, LPModel
from models.run_report import RunReport, digest_of
from tools.balancing import graph_to_instance, solve_balance
from tools.bench import format_table, run_suite, write_csv
from tools.canonical import canonicalize, lift_solution, project_solution, scale_for_layers
from tools.generators import (
    gen_gap_followup,
    gen_gap_instance,
    gen_hardness_instance,
    gen_random,
    gen_random_cnf,
    gen_random_restricted,
    parse_cnf,
)
from tools.instance_io import (
    KIND_CANONICAL,
    KIND_GRAPH,
    KIND_INSTANCE,
    allocation_to_doc,
    canonical_from_doc,
    canonical_to_doc,
    document_kind,
    dump_document,
    graph_from_doc,
    graph_to_doc,
    instance_from_doc,
    instance_to_doc,
    load_document,
    read_allocation,
    write_document,
)
from tools.layered_lp import dump_lp
from tools.oracles import (
    brute_force_opt,
    enumeration_size,
    normalize,
    single_item_matching,
    solve_vector_enumeration,
)
from tools.solver import SolveResult, layers_for, solve
from tools.verify import quota_problems, verify_allocation
from utils.arg_parser import ArgParse, sprint
from utils.errors import (
    InstanceParseError,
    InvariantViolation,
    PreconditionError,
    TrivialScale,
    UsageError,
)
from utils.logger import LogLevel, Logger
from utils.rational import format_rational, parse_rational

MODES = ("auto", "layered", "balance", "brute", "vector")
GEN_KINDS = ("random", "gap", "hardness")
DEFAULT_EPSILON = Fraction(1, 20)
EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_INFEASIBLE = 2
# geometric guesses tried by the layered mode when --M is absent
MAX_GUESSES = 16


def _int_option(arg_parser: ArgParse, long: str, default: Optional[int]) -> Optional[int]:
    raw = arg_parser.option_arg(("", long))
    if raw is None:
        if arg_parser.find_arg(("", long)):
            raise UsageError(f"{long} needs a value")
        return default
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{long} expects an integer, got {raw!r}") from None


def _rational_option(
    arg_parser: ArgParse, long: str, default: Optional[Fraction]
) -> Optional[Fraction]:
    raw = arg_parser.option_arg(("", long))
    if raw is None:
        if arg_parser.find_arg(("", long)):
            raise UsageError(f"{long} needs a value")
        return default
    try:
        return parse_rational(raw, field=long)
    except InstanceParseError as e:
        raise UsageError(str(e)) from None


def _emit(arg_parser: ArgParse, doc: Dict[str, Any]) -> None:
    out = arg_parser.option_arg(("-o", "--out"))
    if out:
        write_document(out, doc)
    else:
        sprint(None, dump_document(doc))


def _instance_from(doc: Dict[str, Any]) -> Instance:
    kind = document_kind(doc)
    if kind == KIND_GRAPH:
        return graph_to_instance(graph_from_doc(doc))
    if kind == KIND_CANONICAL:
        ci, _ = canonical_from_doc(doc)
        return ci.to_instance()[0]
    if kind != KIND_INSTANCE:
        raise UsageError(f"expected an instance, found a {kind} document")
    return instance_from_doc(doc)


def _certificate_doc(cert: InfeasibilityCertificate) -> Dict[str, Any]:
    return {
        "iteration": cert.iteration,
        "status": cert.status,
        "violation": cert.violation,
        "strongest_rows": [[row, dual] for row, dual in cert.strongest()],
    }


def _lp_sink(path: Optional[str]) -> Optional[Callable[[LPModel], None]]:
    """Truncates path and returns a callback appending every LP it sees"""
    if not path:
        return None
    try:
        open(path, "w", encoding="utf-8").close()
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e}") from None

    def sink(model: LPModel) -> None:
        with open(path, "a", encoding="utf-8") as f:
            dump_lp(model, f)

    return sink


def _write_trace(path: Optional[str], report: RunReport) -> None:
    if not path:
        return
    records = report.to_doc().get("trace", [])
    try:
        with open(path, "w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record) + "\n")
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e}") from None


def cmd_gen(arg_parser: ArgParse, settings: dict, logging: Logger) -> int:
    kind = arg_parser.positional(1)
    seed = _int_option(arg_parser, "--seed", 0)
    if kind == "random":
        m = _int_option(arg_parser, "--m", 4)
        n = _int_option(arg_parser, "--n", 8)
        max_utility = _int_option(arg_parser, "--max-utility", 10)
        if arg_parser.find_arg(("", "--restricted")):
            inst = gen_random_restricted(m, n, max_utility, seed)
        else:
            density = _rational_option(arg_parser, "--density", Fraction(1, 2))
            inst = gen_random(m, n, float(density), max_utility, seed)
        doc = instance_to_doc(inst)
    elif kind == "gap":
        M = _int_option(arg_parser, "--M", 2)
        if arg_parser.find_arg(("", "--followup")):
            ci, pa = gen_gap_followup(M)
        else:
            ci, pa = gen_gap_instance(M)
        doc = canonical_to_doc(ci, pa)
    elif kind == "hardness":
        cnf = arg_parser.option_arg(("", "--cnf"))
        if cnf:
            try:
                with open(cnf, encoding="utf-8") as f:
                    formula, n_vars = parse_cnf(f.read())
            except OSError as e:
                raise InstanceParseError(f"cannot read {cnf}: {e}") from None
        else:
            n_vars = _int_option(arg_parser, "--vars", 3)
            n_clauses = _int_option(arg_parser, "--clauses", n_vars)
            satisfiable = not arg_parser.find_arg(("", "--unsat"))
            formula = gen_random_cnf(n_vars, n_clauses, seed, satisfiable)
        doc = graph_to_doc(gen_hardness_instance(formula, n_vars))
    else:
        raise UsageError(f"gen expects one of {', '.join(GEN_KINDS)}, got {kind!r}")

    logging.log(LogLevel.Info, f"generated a {doc['kind']} document ({kind})")
    _emit(arg_parser, doc)
    return EXIT_OK


def _pick_mode(inst: Instance, settings: dict, logging: Logger) -> str:
    if inst.restricted_degree() <= 2:
        mode = "balance"
    elif enumeration_size(inst) <= settings["brute_guard"]:
        mode = "brute"
    else:
        mode = "layered"
    logging.log(LogLevel.Info, f"auto mode picked {mode}")
    return mode


def _layered_at(
    inst: Instance,
    M: Fraction,
    epsilon: Fraction,
    h: int,
    alpha: Optional[Fraction],
    seed: int,
    settings: dict,
    logging: Logger,
    on_model: Optional[Callable[[LPModel], None]],
) -> Tuple[Optional[Allocation], Optional[SolveResult]]:
    """One guess of the layered mode: normalize, canonicalize, solve, map back.

    Returns:
        Tuple[Optional[Allocation], Optional[SolveResult]]: the allocation for
        inst (None on a certificate) and the driver result (None when the
        scale was trivial and the matching answered instead)
    """
    norm = normalize(inst, M)
    try:
        ci, backmap = canonicalize(norm, Fraction(2 * inst.n), epsilon, logging)
    except TrivialScale as e:
        logging.log(LogLevel.Info, f"M={M}: {e}, using the single-item matching")
        return single_item_matching(inst)[1], None

    scaled = scale_for_layers(ci, h)
    res = solve(
        scaled,
        epsilon=epsilon,
        seed=seed,
        layers=h,
        alpha=alpha,
        retry_cap=settings["retry_cap"],
        guard=settings["guard_nonzeros"],
        tol=settings["lp_tolerance"],
        logging=logging,
        on_model=on_model,
    )
    if res.certificate is not None:
        return None, res
    try:
        alloc = lift_solution(norm, ci, backmap, res.allocation, res.final_alpha * (h + 1))
    except (PreconditionError, InvariantViolation) as e:
        logging.log(LogLevel.Debug, f"M={M}: lift check failed ({e}), projecting instead")
        alloc = project_solution(ci, backmap, res.allocation)
    return alloc, res


def _solve_layered(
    inst: Instance,
    M: Optional[Fraction],
    epsilon: Fraction,
    h: int,
    alpha: Optional[Fraction],
    seed: int,
    settings: dict,
    logging: Logger,
    on_model: Optional[Callable[[LPModel], None]],
    report: RunReport,
) -> Optional[Allocation]:
    if M is not None:
        if M <= 0:
            raise UsageError("--M must be positive")
        alloc, res = _layered_at(inst, M, epsilon, h, alpha, seed, settings, logging, on_model)
        report.parameters["path"] = "matching" if res is None else "layered"
        if res is not None:
            for record in res.trace:
                report.add_trace(record)
            if res.certificate is not None:
                report.certificate = _certificate_doc(res.certificate)
        return alloc

    # ? Without a guess, binary search the geometric ladder below the
    # ? smallest agent total and keep the best verified allocation
    best_value, best = single_item_matching(inst)
    top = min(inst.total_utility(a) for a in range(inst.m))
    ladder = sorted(
        {top / 2**k for k in range(MAX_GUESSES) if top / 2**k > best_value}
    )
    best_trace: List[Dict[str, Any]] = []
    paths: Set[str] = set()
    lo, hi = 0, len(ladder) - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        guess = ladder[mid]
        alloc, res = _layered_at(inst, guess, epsilon, h, alpha, seed, settings, logging, on_model)
        paths.add("matching" if res is None else "layered")
        logging.log(LogLevel.Info, f"guess M={guess}: {'feasible' if alloc else 'certificate'}")
        if alloc is None:
            hi = mid - 1
            continue
        lo = mid + 1
        got = verify_allocation(inst, alloc).value
        if got > best_value:
            best_value, best = got, alloc
            best_trace = res.trace if res is not None else []
    report.parameters["path"] = "layered" if "layered" in paths else "matching"
    if "layered" not in paths:
        logging.log(LogLevel.Info, "every guess fell back to the single-item matching")
    for record in best_trace:
        report.add_trace(record)
    return best


def _solve_canonical(
    doc: Dict[str, Any],
    arg_parser: ArgParse,
    settings: dict,
    logging: Logger,
    report: RunReport,
    start: float,
) -> int:
    """Runs the driver on a canonical document as given"""
    ci, pa = canonical_from_doc(doc)
    epsilon = _rational_option(arg_parser, "--epsilon", ci.epsilon or DEFAULT_EPSILON)
    layers = _int_option(arg_parser, "--layers", None)
    h = layers if layers is not None else layers_for(epsilon)
    res = solve(
        ci,
        pa,
        epsilon,
        report.seed,
        h,
        _rational_option(arg_parser, "--alpha", None),
        settings["retry_cap"],
        settings["guard_nonzeros"],
        settings["lp_tolerance"],
        logging,
        _lp_sink(arg_parser.option_arg(("", "--dump-lp"))),
    )
    report.mode = "layered"
    report.wall_time = time.perf_counter() - start
    report.parameters.update({"h": str(h), "alpha": str(res.alpha)})
    for record in res.trace:
        report.add_trace(record)
    if res.certificate is not None:
        report.status = "infeasible"
        report.certificate = _certificate_doc(res.certificate)
        return _finish_infeasible(arg_parser, report)

    problems = quota_problems(ci, res.allocation, res.final_alpha)
    if problems:
        raise InvariantViolation(f"driver output fails its quotas: {problems[0]}")
    report.status = "feasible"
    report.parameters["final_alpha"] = str(res.final_alpha)
    out = allocation_to_doc(res.allocation)
    out["report"] = report.to_doc()
    _write_trace(arg_parser.option_arg(("", "--trace")), report)
    _emit(arg_parser, out)
    return EXIT_OK


def _finish_infeasible(arg_parser: ArgParse, report: RunReport) -> int:
    _write_trace(arg_parser.option_arg(("", "--trace")), report)
    _emit(arg_parser, report.to_doc())
    return EXIT_INFEASIBLE


def cmd_solve(arg_parser: ArgParse, settings: dict, logging: Logger) -> int:
    path = arg_parser.positional(1)
    if not path:
        raise UsageError("solve needs an instance file")
    doc = load_document(path)
    mode = arg_parser.option_arg(("", "--mode")) or "auto"
    if mode not in MODES:
        raise UsageError(f"--mode expects one of {', '.join(MODES)}, got {mode!r}")
    seed = _int_option(arg_parser, "--seed", 0)
    parameters = {
        k: v
        for k in ("--mode", "--epsilon", "--layers", "--alpha", "--M")
        if (v := arg_parser.option_arg(("", k))) is not None
    }
    report = RunReport("solve", parameters, digest_of(doc), seed, mode)
    start = time.perf_counter()

    if document_kind(doc) == KIND_CANONICAL and mode in ("auto", "layered"):
        code = _solve_canonical(doc, arg_parser, settings, logging, report, start)
        logging.log(LogLevel.Info, f"solve finished in {time.perf_counter() - start:.3f}s")
        return code

    inst = _instance_from(doc)
    if mode == "auto":
        mode = _pick_mode(inst, settings, logging)
    report.mode = mode
    epsilon = _rational_option(arg_parser, "--epsilon", DEFAULT_EPSILON)

    if mode == "balance":
        res = solve_balance(
            inst, epsilon, settings["pricing_guard"], settings["subset_sum_cap"], logging
        )
        for k, (guess, feasible) in enumerate(res.probes, 1):
            lp = "feasible" if feasible else "infeasible"
            report.add_trace({"iteration": k, "M": guess, "lp": lp})
        report.parameters["lp_target"] = str(res.lp_target)
        alloc: Optional[Allocation] = res.allocation
    elif mode == "brute":
        alloc = brute_force_opt(inst, settings["brute_guard"])[1]
    elif mode == "vector":
        alloc = solve_vector_enumeration(inst, settings["vector_guard"])[1]
    else:
        layers = _int_option(arg_parser, "--layers", None)
        h = layers if layers is not None else layers_for(epsilon)
        report.parameters["h"] = str(h)
        alloc = _solve_layered(
            inst,
            _rational_option(arg_parser, "--M", None),
            epsilon,
            h,
            _rational_option(arg_parser, "--alpha", None),
            seed,
            settings,
            logging,
            _lp_sink(arg_parser.option_arg(("", "--dump-lp"))),
            report,
        )

    report.wall_time = time.perf_counter() - start
    if alloc is None:
        report.status = "infeasible"
        return _finish_infeasible(arg_parser, report)

    checked = verify_allocation(inst, alloc)
    if not checked.ok:
        raise InvariantViolation(f"{mode} returned a broken allocation: {checked.problems[0]}")
    report.status = "feasible"
    report.value = checked.value
    if arg_parser.find_arg(("", "--oracle")):
        report.oracle = brute_force_opt(inst, settings["brute_guard"])[0]
    logging.log(
        LogLevel.Info, f"{mode}: value {checked.value} in {report.wall_time:.3f}s"
    )

    out = allocation_to_doc(alloc, checked.value)
    out["report"] = report.to_doc()
    _write_trace(arg_parser.option_arg(("", "--trace")), report)
    _emit(arg_parser, out)
    return EXIT_OK


def cmd_verify(arg_parser: ArgParse, settings: dict, logging: Logger) -> int:
    inst_path, alloc_path = arg_parser.positional(1), arg_parser.positional(2)
    if not inst_path or not alloc_path:
        raise UsageError("verify needs an instance file and an allocation file")
    doc = load_document(inst_path)
    alloc, claimed, duplicates = read_allocation(alloc_path)

    if document_kind(doc) == KIND_CANONICAL:
        ci, _ = canonical_from_doc(doc)
        alpha = _rational_option(arg_parser, "--alpha", Fraction(1))
        problems = [f"item {i} is owned twice" for i in sorted(set(duplicates))]
        problems += quota_problems(ci, alloc, alpha)
        got: Optional[Fraction] = None
    else:
        inst = _instance_from(doc)
        checked = verify_allocation(
            inst, alloc, claimed, duplicates, _rational_option(arg_parser, "--at-least", None)
        )
        problems, got = checked.problems, checked.value

    for problem in problems:
        sprint(None, f"FAIL {problem}")
    if problems:
        logging.log(LogLevel.Warn, f"{len(problems)} checks failed")
        return EXIT_FAILED_CHECK
    shown = "" if got is None else f" value={format_rational(got)}"
    sprint(None, f"PASS{shown}")
    return EXIT_OK


def cmd_bench(arg_parser: ArgParse, settings: dict, logging: Logger) -> int:
    suite = arg_parser.positional(1)
    if not suite:
        raise UsageError("bench needs a suite name")
    count = _int_option(arg_parser, "--count", 10)
    rows = run_suite(suite, settings, count, logging)
    if not rows:
        raise UsageError(f"suite {suite} produced no rows")
    sprint(None, format_table(rows))
    out = arg_parser.option_arg(("-o", "--out")) or os.path.join(
        settings["bench_dir"], f"{suite}.csv"
    )
    write_csv(rows, out)
    logging.log(LogLevel.Info, f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[ArgParse, dict, Logger], int]] = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def dispatch(arg_parser: ArgParse, settings: dict, logging: Logger) -> int:
    command = arg_parser.positional(0)
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r}, expected one of {', '.join(COMMANDS)}")
    return COMMANDS[command](arg_parser, settings, logging)
