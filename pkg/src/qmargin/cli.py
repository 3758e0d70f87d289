"""Experiment runner.

Subcommands execute the verification suites and the training experiment and
write one ``report.json`` plus a flat ``sweep.csv`` per run (``train`` also
emits the dataset it used).  Every key can come from an INI config file
(section per subcommand, plus ``[common]``) or a flag of the same name;
flags win.  All parameter problems are reported together before any
computation starts.

Exit codes: 0 pass, 1 verification failure, 2 usage or config error,
3 infeasible experiment.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    corrupted_margin_exact,
    corrupted_margin_mc,
    lemma1_table,
    negative_control_entangled_circuit,
    negative_control_wire1_entangling,
    random_layered_circuit,
    theorem1_clause1_report,
    theorem1_clause2_report,
)
from .classifier import Ansatz, classify, margin, margins_batch
from .exceptions import InfeasibleSpecError
from .noise import BitflipChannel, CoherentChannel, gaussian_trig_expectations
from .rng import derive_seed, rng_from
from .statevec import random_state
from .training import (
    DatasetSpec,
    FitConfig,
    LossFn,
    corrupt_dataset,
    corrupted_risk_mc,
    empirical_objective,
    empirical_risk,
    expected_corrupted_risk,
    fit_objective,
    generate_dataset,
    load_dataset,
    loss,
    regularized_objective,
    save_dataset,
)

PASS, FAIL, USAGE_ERROR, INFEASIBLE = 0, 1, 2, 3

COMMON_KEYS = {
    "seed": (int, 12345, "master seed recorded in every report"),
    "out": (str, "qmargin_out", "output directory"),
    "threads": (int, 1, "worker threads for sweep points"),
}

SCHEMAS = {
    "verify-theorem1": {
        **COMMON_KEYS,
        "n_qubits": (int, 4, "wires per random circuit (>= 2)"),
        "layers": (int, 2, "entangling layers per random circuit"),
        "circuits": (int, 10, "number of random circuits"),
        "draws": (int, 100, "noise draws per circuit (alias: --trials)"),
        "negative_draws": (int, 10, "draws per negative control"),
    },
    "verify-theorem2": {
        **COMMON_KEYS,
        "n_qubits": (int, 2, "wires per random configuration"),
        "pairs": (int, 20, "random (theta, state) pairs per grid point"),
        "p_grid": (str, "0,0.05,0.1,0.15,0.2,0.24,0.3", "bit-flip rates"),
        "q_grid": (str, "0,0.08,0.15,0.3333333333333333", "rotation-axis rates"),
        "mu_grid": (str, "0,0.5235987755982988,-1.0471975511965976,"
                         "1.5707963267948966,3.141592653589793", "rotation means"),
        "tau_grid": (str, "0,0.2,0.5", "jitter standard deviations"),
        "mc_checks": (int, 20, "grid rows cross-checked by Monte Carlo"),
        "mc_trials": (int, 20000, "Monte Carlo trials per check (alias: --trials)"),
    },
    "verify-lemmas": {
        **COMMON_KEYS,
        "n_qubits": (int, 2, "wires per random instance"),
        "instances": (int, 2000, "conditional-margin table instances"),
        "lemma2_samples": (int, 100000, "zero-sum quadruples (alias: --trials)"),
    },
    "train": {
        **COMMON_KEYS,
        "dataset": (str, "", "dataset file to load; empty generates one"),
        "n_qubits": (int, 2, "wires for the generated dataset"),
        "n_items": (int, 20, "training items to generate"),
        "margin_gap": (float, 0.05, "rejection threshold on planted margins"),
        "entangle": (bool, True, "entangle the generated states"),
        "loss": (str, "logistic", "hinge or logistic"),
        "p": (float, 0.1, "bit-flip rate for the noisy fit"),
        "step_size": (float, 0.25, "gradient-descent step"),
        "n_iters": (int, 150, "iterations per restart"),
        "restarts": (int, 2, "random restarts per fit"),
        "init_scale": (float, 0.5, "stddev of the initial angles"),
        "regularized": (bool, False, "also fit the penalty-regularized objective"),
        "test_items": (int, 200, "held-out items when generating data"),
        "mc_replicates": (int, 0, "corruption replays for the identity check "
                                  "(alias: --trials; 0 skips)"),
    },
}

TRIALS_ALIAS = {
    "verify-theorem1": "draws",
    "verify-theorem2": "mc_trials",
    "verify-lemmas": "lemma2_samples",
    "train": "mc_replicates",
}

FLOAT_FMT = "%.17g"


def _fmt(value) -> str:
    if isinstance(value, float):
        return FLOAT_FMT % value
    return str(value)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_value(kind, text: str):
    if kind is bool:
        return _parse_bool(text)
    return kind(text)


def _parse_grid(text: str, key: str, errors: list[str]) -> list[float]:
    values = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            values.append(float(token))
        except ValueError:
            errors.append(f"{key}: not a number: {token!r}")
    if not values:
        errors.append(f"{key}: empty grid")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmargin",
                                     description="noise analysis for quantum margin classifiers")
    parser.add_argument("--version", action="version", version=f"qmargin {__version__}")
    subparsers = parser.add_subparsers(dest="command")
    for command, schema in SCHEMAS.items():
        sub = subparsers.add_parser(command)
        sub.add_argument("--config", type=str, default=None, help="INI config file")
        sub.add_argument("--trials", type=int, default=None,
                         help=f"alias for --{TRIALS_ALIAS[command].replace('_', '-')}")
        for key, (kind, default, help_text) in schema.items():
            flag = "--" + key.replace("_", "-")
            if kind is bool:
                sub.add_argument(flag, type=_parse_bool, default=None,
                                 metavar="BOOL", help=f"{help_text} (default {default})")
            else:
                sub.add_argument(flag, type=kind, default=None,
                                 help=f"{help_text} (default {default})")
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> tuple[dict, list[str]]:
    """Merge defaults, config file, and flags; collect every problem found."""
    schema = SCHEMAS[command]
    errors: list[str] = []
    cfg = {key: default for key, (_, default, _) in schema.items()}

    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            errors.append(f"config file not found: {path}")
        else:
            parser = configparser.ConfigParser()
            try:
                parser.read(path)
            except configparser.Error as exc:
                errors.append(f"config file parse error: {exc}")
                parser = None
            if parser is not None:
                for section in parser.sections():
                    if section not in ("common", command) and section not in SCHEMAS:
                        errors.append(f"unknown config section [{section}]")
                for section in ("common", command):
                    if not parser.has_section(section):
                        continue
                    allowed = COMMON_KEYS if section == "common" else schema
                    for key, text in parser.items(section):
                        if key not in allowed:
                            errors.append(f"unknown key {key!r} in section [{section}]")
                            continue
                        kind = schema[key][0]
                        try:
                            cfg[key] = _parse_value(kind, text)
                        except ValueError as exc:
                            errors.append(f"key {key!r}: {exc}")

    for key, (kind, _, _) in schema.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            cfg[key] = flag_value
    if args.trials is not None:
        cfg[TRIALS_ALIAS[command]] = args.trials

    _validate(command, cfg, errors)
    return cfg, errors


def _validate(command: str, cfg: dict, errors: list[str]) -> None:
    def positive(key):
        if cfg[key] < 1:
            errors.append(f"{key} must be >= 1, got {cfg[key]}")

    if cfg["threads"] < 1:
        errors.append(f"threads must be >= 1, got {cfg['threads']}")
    if command == "verify-theorem1":
        if cfg["n_qubits"] < 2:
            errors.append(f"n_qubits must be >= 2 for invariance checks, got {cfg['n_qubits']}")
        for key in ("layers", "circuits", "draws", "negative_draws"):
            positive(key)
    elif command == "verify-theorem2":
        for key in ("n_qubits", "pairs", "mc_checks", "mc_trials"):
            positive(key)
        cfg["_p_grid"] = _parse_grid(cfg["p_grid"], "p_grid", errors)
        cfg["_q_grid"] = _parse_grid(cfg["q_grid"], "q_grid", errors)
        cfg["_mu_grid"] = _parse_grid(cfg["mu_grid"], "mu_grid", errors)
        cfg["_tau_grid"] = _parse_grid(cfg["tau_grid"], "tau_grid", errors)
        for p in cfg.get("_p_grid", ()):
            if not 0 <= p <= 1 / 3:
                errors.append(f"p_grid value {p} outside [0, 1/3]")
        for q in cfg.get("_q_grid", ()):
            if not 0 <= q <= 1 / 3:
                errors.append(f"q_grid value {q} outside [0, 1/3]")
        for mu in cfg.get("_mu_grid", ()):
            if not -np.pi <= mu <= np.pi:
                errors.append(f"mu_grid value {mu} outside [-pi, pi]")
        for tau in cfg.get("_tau_grid", ()):
            if tau < 0:
                errors.append(f"tau_grid value {tau} is negative")
    elif command == "verify-lemmas":
        for key in ("n_qubits", "instances", "lemma2_samples"):
            positive(key)
    elif command == "train":
        if cfg["dataset"] and not Path(cfg["dataset"]).is_file():
            errors.append(f"dataset: file not found: {cfg['dataset']}")
        if not cfg["dataset"]:
            for key in ("n_qubits", "n_items", "test_items"):
                positive(key)
            if not 0 <= cfg["margin_gap"] < 0.5:
                errors.append(f"margin_gap must be in [0, 1/2), got {cfg['margin_gap']}")
        if cfg["loss"] not in ("hinge", "logistic"):
            errors.append(f"loss must be hinge or logistic, got {cfg['loss']!r}")
        if not 0 <= cfg["p"] < 0.25:
            errors.append(f"p must be in [0, 1/4), got {cfg['p']}")
        for key in ("n_iters", "restarts"):
            positive(key)
        if cfg["step_size"] <= 0:
            errors.append(f"step_size must be positive, got {cfg['step_size']}")


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_report(out_dir: Path, command: str, cfg: dict, passed: bool, summary: dict) -> None:
    echo = {k: v for k, v in cfg.items() if not k.startswith("_")}
    report = {
        "command": command,
        "version": __version__,
        "master_seed": cfg["seed"],
        "config": echo,
        "pass": bool(passed),
        "summary": summary,
    }
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n"
    )


def _write_csv(out_dir: Path, header: list[str], rows: list[list]) -> None:
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _map_points(fn, points, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, points))
    return [fn(point) for point in points]


# --- verify-theorem1 ---------------------------------------------------------


def cmd_verify_theorem1(cfg: dict) -> int:
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = cfg["seed"]
    n = cfg["n_qubits"]
    rows: list[list] = []
    case_max: dict[str, float] = {}

    def record(case: str, circuit_index: int, deviations: np.ndarray) -> None:
        case_max[case] = max(case_max.get(case, 0.0), float(deviations.max()))
        for d, dev in enumerate(deviations):
            rows.append([case, circuit_index, d, dev])

    def run_circuit(index: int):
        rng = rng_from(seed, 0, index)
        circuit = random_layered_circuit(n, cfg["layers"], rng)
        state = random_state(n, rng)
        ansatz = Ansatz(n)
        theta = rng.uniform(-np.pi, np.pi, size=ansatz.n_params)
        results = {
            "clause1": theorem1_clause1_report(
                circuit, state, cfg["draws"], seed=derive_seed(seed, 1, index)),
            "clause1_tail": theorem1_clause1_report(
                circuit, state, cfg["draws"], seed=derive_seed(seed, 2, index),
                entangled_tail=True),
            "clause2": theorem1_clause2_report(
                ansatz, theta, state, cfg["draws"], seed=derive_seed(seed, 3, index)),
        }
        negatives = {
            "negative_wire1_entangling": negative_control_wire1_entangling(
                circuit, state, cfg["negative_draws"], seed=derive_seed(seed, 4, index)),
            "negative_entangled_circuit": negative_control_entangled_circuit(
                circuit, state, cfg["negative_draws"], seed=derive_seed(seed, 5, index)),
        }
        return index, results, negatives

    outputs = _map_points(run_circuit, range(cfg["circuits"]), cfg["threads"])
    for index, results, negatives in sorted(outputs):
        for case, report in {**results, **negatives}.items():
            record(case, index, report.deviations)

    positive_max = max(case_max[c] for c in ("clause1", "clause1_tail", "clause2"))
    negative_max = max(case_max["negative_wire1_entangling"],
                       case_max["negative_entangled_circuit"])
    passed = positive_max <= 1e-12 and negative_max > 1e-3

    _write_csv(out_dir, ["case", "circuit", "draw", "deviation"], rows)
    _write_report(out_dir, "verify-theorem1", cfg, passed, {
        "max_deviation_by_case": {k: case_max[k] for k in sorted(case_max)},
        "invariance_max_deviation": positive_max,
        "invariance_tolerance": 1e-12,
        "negative_controls_expected_deviation": True,
        "negative_controls_max_deviation": negative_max,
    })
    return PASS if passed else FAIL


# --- verify-theorem2 ---------------------------------------------------------


def cmd_verify_theorem2(cfg: dict) -> int:
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = cfg["seed"]
    n = cfg["n_qubits"]
    ansatz = Ansatz(n)

    grid = [(p, q, mu, tau)
            for p in cfg["_p_grid"] for q in cfg["_q_grid"]
            for mu in cfg["_mu_grid"] for tau in cfg["_tau_grid"]]
    mc_stride = max(1, len(grid) // cfg["mc_checks"])

    def run_point(item):
        index, (p, q, mu, tau) = item
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # rows beyond the sign-preservation edge are intended
            bitflip = BitflipChannel(p)
        coherent = CoherentChannel(mu, tau, q)
        cos_damped, sin_damped = gaussian_trig_expectations(mu, tau)
        eta = (1 - 4 * p) * (1 - 2 * q * (1 - cos_damped))
        delta = 2 * q * abs(sin_damped) / eta if eta != 0 else float("nan")
        half_width = 2 * q * abs(sin_damped)

        min_slack = np.inf
        mu0_residual = 0.0
        sign_eligible = 0
        sign_violations = 0
        mc_abs_diff = mc_stderr = None
        for pair in range(cfg["pairs"]):
            rng = rng_from(seed, index, pair)
            theta = rng.uniform(-np.pi, np.pi, size=ansatz.n_params)
            state = random_state(n, rng)
            m = margin(ansatz, theta, state)
            exact = corrupted_margin_exact(ansatz, theta, state, bitflip, coherent)
            min_slack = min(min_slack, half_width - abs(exact - eta * m))
            if mu == 0:
                mu0_residual = max(mu0_residual, abs(exact - eta * m))
            if eta > 0 and abs(m) > delta:
                sign_eligible += 1
                if classify(exact) != classify(m):
                    sign_violations += 1
            if pair == 0 and index % mc_stride == 0:
                estimate, stderr = corrupted_margin_mc(
                    ansatz, theta, state, bitflip, coherent, cfg["mc_trials"],
                    seed=derive_seed(seed, 6, index))
                mc_abs_diff = abs(estimate - exact)
                mc_stderr = stderr
        sign_status = "checked" if eta > 0 else "skipped (eta <= 0: shrinkage sign flip)"
        return (index, p, q, mu, tau, eta, delta, min_slack, mu0_residual,
                sign_eligible, sign_violations, sign_status, mc_abs_diff, mc_stderr)

    outputs = _map_points(run_point, list(enumerate(grid)), cfg["threads"])
    outputs.sort()

    rows = []
    worst_slack = np.inf
    worst_mu0 = 0.0
    total_violations = 0
    mc_failures = 0
    mc_checked = 0
    for (index, p, q, mu, tau, eta, delta, min_slack, mu0_residual,
         sign_eligible, sign_violations, sign_status, mc_abs_diff, mc_stderr) in outputs:
        worst_slack = min(worst_slack, min_slack)
        worst_mu0 = max(worst_mu0, mu0_residual) if mu == 0 else worst_mu0
        total_violations += sign_violations
        mc_ok = ""
        if mc_abs_diff is not None:
            mc_checked += 1
            ok = mc_abs_diff <= 5 * mc_stderr + 1e-12
            mc_failures += 0 if ok else 1
            mc_ok = "pass" if ok else "fail"
        rows.append([index, p, q, mu, tau, eta, delta, min_slack,
                     mu0_residual if mu == 0 else "",
                     sign_eligible, sign_violations, sign_status,
                     mc_abs_diff if mc_abs_diff is not None else "",
                     mc_stderr if mc_stderr is not None else "", mc_ok])

    passed = (worst_slack >= -1e-10 and worst_mu0 <= 1e-12
              and total_violations == 0 and mc_failures == 0)
    _write_csv(out_dir, ["index", "p", "q", "mu", "tau", "eta", "delta", "min_slack",
                         "mu0_residual", "sign_eligible", "sign_violations", "sign_status",
                         "mc_abs_diff", "mc_stderr", "mc_status"], rows)
    _write_report(out_dir, "verify-theorem2", cfg, passed, {
        "grid_points": len(grid),
        "pairs_per_point": cfg["pairs"],
        "worst_containment_slack": float(worst_slack),
        "worst_mu0_residual": float(worst_mu0),
        "sign_violations": total_violations,
        "mc_rows_checked": mc_checked,
        "mc_failures": mc_failures,
    })
    return PASS if passed else FAIL


# --- verify-lemmas -----------------------------------------------------------


def cmd_verify_lemmas(cfg: dict) -> int:
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = cfg["seed"]
    n = cfg["n_qubits"]
    ansatz = Ansatz(n)

    def run_instance(index: int):
        rng = rng_from(seed, 0, index)
        theta = rng.uniform(-np.pi, np.pi, size=ansatz.n_params)
        state = random_state(n, rng)
        mu = rng.uniform(-np.pi, np.pi)
        tau = rng.uniform(0.0, 1.0)
        report = lemma1_table(ansatz, theta, state, mu, tau)
        return (index, mu, tau,
                float(np.abs(report.column_sums).max()),
                abs(report.eq_m00_residual), abs(report.eq_m03_residual),
                abs(report.eq_transverse_residual), report.bound_slack,
                abs(report.overlap_imag))

    outputs = _map_points(run_instance, range(cfg["instances"]), cfg["threads"])
    outputs.sort()
    rows = [list(row) for row in outputs]

    arr = np.array([row[3:] for row in outputs])
    max_colsum, max_eq00, max_eq03, max_transverse = arr[:, 0].max(), arr[:, 1].max(), arr[:, 2].max(), arr[:, 3].max()
    min_bound_slack = arr[:, 4].min()
    max_overlap = arr[:, 5].max()

    rng = rng_from(seed, 1)
    samples = cfg["lemma2_samples"]
    quads = rng.uniform(-0.45 / 3, 0.45 / 3, size=(samples, 3))
    d = -quads.sum(axis=1)
    fine = np.abs(d) <= 0.45
    quads, d = quads[fine], d[fine]
    slacks = {}
    for kind in ("hinge", "logistic"):
        fn = LossFn(kind)
        lhs = sum(loss(fn, quads[:, i]) for i in range(3)) + loss(fn, d)
        lhs = lhs / 4
        rhs = (loss(fn, np.abs(quads[:, 0]) / 3) + loss(fn, -np.abs(quads[:, 0]) / 3)) / 2
        slack = lhs - rhs
        slacks[kind] = {
            "count": int(slack.size),
            "min": float(slack.min()),
            "median": float(np.median(slack)),
            "max": float(slack.max()),
        }

    checks = {
        "column_zero_sum_max": float(max_colsum),
        "eq_m00_max_residual": float(max_eq00),
        "eq_m03_max_residual": float(max_eq03),
        "eq_transverse_max_residual": float(max_transverse),
        "bound_min_slack": float(min_bound_slack),
        "overlap_imag_max": float(max_overlap),
        "lemma2_slack": slacks,
    }
    passed = (max_colsum <= 1e-10 and max_eq00 <= 1e-10 and max_eq03 <= 1e-10
              and max_transverse <= 1e-10 and min_bound_slack >= -1e-10
              and max_overlap <= 0.5 + 1e-12
              and all(s["min"] >= -1e-12 for s in slacks.values()))

    _write_csv(out_dir, ["index", "mu", "tau", "max_column_sum", "eq_m00", "eq_m03",
                         "eq_transverse", "bound_slack", "overlap_imag"], rows)
    _write_report(out_dir, "verify-lemmas", cfg, passed, checks)
    return PASS if passed else FAIL


# --- train -------------------------------------------------------------------


def cmd_train(cfg: dict) -> int:
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = cfg["seed"]
    fn = LossFn(cfg["loss"])

    test_set = None
    if cfg["dataset"]:
        dataset = load_dataset(cfg["dataset"])
        source = "loaded"
    else:
        spec = DatasetSpec(n_qubits=cfg["n_qubits"], n_items=cfg["n_items"],
                           margin_gap=cfg["margin_gap"], entangle=cfg["entangle"])
        dataset, theta_star = generate_dataset(spec, seed=derive_seed(seed, 10))
        test_spec = DatasetSpec(n_qubits=cfg["n_qubits"], n_items=cfg["test_items"],
                                planted_theta=tuple(theta_star),
                                margin_gap=cfg["margin_gap"], entangle=cfg["entangle"])
        test_set, _ = generate_dataset(test_spec, seed=derive_seed(seed, 11))
        source = "generated"
    save_dataset(dataset, out_dir / "dataset.txt")

    ansatz = Ansatz(dataset.n_qubits)
    config = FitConfig(step_size=cfg["step_size"], n_iters=cfg["n_iters"],
                       restarts=cfg["restarts"], seed=derive_seed(seed, 12),
                       init_scale=cfg["init_scale"])
    p = cfg["p"]
    lam = 4 * p / (1 - 4 * p)

    corrupted = corrupt_dataset(dataset, BitflipChannel(p), seed=derive_seed(seed, 13))

    fits = {
        "clean": fit_objective(empirical_objective(ansatz, dataset, fn), config),
        "noisy": fit_objective(empirical_objective(ansatz, corrupted, fn), config),
    }
    if cfg["regularized"]:
        fits["regularized"] = fit_objective(regularized_objective(ansatz, dataset, fn, lam), config)

    rows = []
    summary_fits = {}
    identity_residual_max = 0.0
    for kind, result in fits.items():
        for restart, trace in enumerate(result.all_traces):
            for iteration, value in enumerate(trace):
                rows.append([kind, restart, iteration, value])
        theta = result.theta
        report = expected_corrupted_risk(ansatz, theta, dataset, fn, p)
        residual = abs(report.expected_corrupted
                       - (1 - 4 * p) * (report.empirical + report.lam * report.penalty))
        identity_residual_max = max(identity_residual_max, residual)
        margins_clean = margins_batch(ansatz, theta, dataset.states)
        entry = {
            "final_objective": result.objective_value,
            "winning_restart": result.restart_index,
            "train_risk_clean_states": empirical_risk(ansatz, theta, dataset, fn),
            "mean_abs_margin_clean_states": float(np.mean(np.abs(margins_clean))),
            "expected_corrupted_risk": report.expected_corrupted,
            "penalty": report.penalty,
            "penalty_lower_bound": report.penalty_lower_bound,
            "identity_residual": residual,
        }
        if test_set is not None:
            entry["test_risk"] = empirical_risk(ansatz, theta, test_set, fn)
            test_margins = margins_batch(ansatz, theta, test_set.states)
            entry["test_accuracy"] = float(np.mean(
                np.where(test_margins > 0, 1, -1) == test_set.labels))
        summary_fits[kind] = entry

    mc_summary = None
    if cfg["mc_replicates"] > 0:
        theta = fits["clean"].theta
        report = expected_corrupted_risk(ansatz, theta, dataset, fn, p)
        mc_mean, mc_stderr = corrupted_risk_mc(ansatz, theta, dataset, fn, BitflipChannel(p),
                                               cfg["mc_replicates"],
                                               seed=derive_seed(seed, 14))
        mc_summary = {
            "replicates": cfg["mc_replicates"],
            "mc_mean": mc_mean,
            "mc_stderr": mc_stderr,
            "exact": report.expected_corrupted,
            "abs_diff": abs(mc_mean - report.expected_corrupted),
            "pass": abs(mc_mean - report.expected_corrupted) <= 5 * mc_stderr + 1e-12,
        }

    shrinkage = (summary_fits["noisy"]["mean_abs_margin_clean_states"]
                 < summary_fits["clean"]["mean_abs_margin_clean_states"])
    passed = identity_residual_max <= 1e-10 and (mc_summary is None or mc_summary["pass"])

    _write_csv(out_dir, ["fit", "restart", "iteration", "objective"], rows)
    _write_report(out_dir, "train", cfg, passed, {
        "dataset": {"source": source, "n_items": len(dataset), "n_qubits": dataset.n_qubits,
                    "file": "dataset.txt"},
        "p": p,
        "lambda": lam,
        "fits": summary_fits,
        "noisy_margins_below_clean": bool(shrinkage),
        "identity_residual_max": identity_residual_max,
        "mc_identity_check": mc_summary,
    })
    return PASS if passed else FAIL


COMMANDS = {
    "verify-theorem1": cmd_verify_theorem1,
    "verify-theorem2": cmd_verify_theorem2,
    "verify-lemmas": cmd_verify_lemmas,
    "train": cmd_train,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    cfg, errors = resolve_config(args.command, args)
    if errors:
        for message in errors:
            print(f"config error: {message}", file=sys.stderr)
        return USAGE_ERROR
    try:
        return COMMANDS[args.command](cfg)
    except InfeasibleSpecError as exc:
        print(f"infeasible experiment: {exc}", file=sys.stderr)
        return INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
