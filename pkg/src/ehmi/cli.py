"""Command-line entry point: ``ehmi {calibrate,validate,decide,simulate,sweep,report}``.

Every report is printed with 3-decimal fixed precision and JSON written with
sorted keys, so repeated runs on identical inputs give identical bytes.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

from . import config as defaults
from .calibration import Degenerate, EmptyDataset, estimate_delta, evaluate_forms, fit_mle, label_intention
from .data_io import (DataError, LabeledEncounter, is_encounter_file, labeled_encounters, parse_trajectories,
                      read_encounters)
from .disclosure import (BeliefModel, decide, deception_census, deception_success, ehmi_gain_census,
                         pet_shift_census, summary_json)
from .game import DeltaRule, GameForm
from .kinematics import KinematicsError
from .payoff import PayoffParams
from .simulation.pet import DANGER_THRESHOLD, NoCrossing
from .simulation.scenario import (TRAJECTORY_HEADER, GridSpec, ScenarioConfig, run_pair, shipped_scenario,
                                  sweep_initial_states)
from .simulation.tracking import TrackingDiverged

log = logging.getLogger("ehmi")

FORMS = [f.value for f in GameForm]


class CliError(Exception):
    pass


# -- inputs ---------------------------------------------------------------------------

def _labeler(a, b, cp, cfg):
    return label_intention(a, b, cp, cfg)


def load_data(path: Optional[str], cfg: dict) -> List[LabeledEncounter]:
    """Encounter CSV as is; trajectory CSV is paired, turned into encounters and labeled."""
    if not path:
        raise CliError("--data is required")
    p = Path(path)
    if not p.is_file():
        raise CliError(f"no such file: {path}")
    if p.stat().st_size == 0:
        raise CliError(f"{path} is empty")
    if is_encounter_file(p):
        return read_encounters(p)
    trajs = parse_trajectories(p, defaults.default_interaction(cfg))
    data, failed = labeled_encounters(trajs, defaults.default_interaction(cfg), _labeler)
    for pid, why in failed:
        log.info("pair %s dropped: %s", pid, why)
    if not data:
        raise CliError(f"{path}: no usable left-turn/straight interactions")
    return data


def load_params(path: Optional[str], cfg: dict) -> PayoffParams:
    return PayoffParams.load(path) if path else defaults.default_params(cfg)


def delta_rule(arg: Optional[str], cfg: dict, data=None) -> DeltaRule:
    if arg is None:
        return defaults.default_delta(cfg)
    if arg == "auto":
        if data is None:
            raise CliError("--delta auto needs --data")
        return estimate_delta(data)
    try:
        return DeltaRule(float(arg))
    except ValueError as exc:
        raise CliError(f"bad --delta: {exc}") from None


def load_beliefs(path: Optional[str], cfg: dict) -> BeliefModel:
    return defaults.load_beliefs(path) if path else defaults.default_beliefs(cfg)


def load_scenario(arg: Optional[str], cfg: dict) -> ScenarioConfig:
    name = arg or cfg["scenario"]
    if Path(name).is_file():
        return ScenarioConfig.load(name)
    try:
        return shipped_scenario(name)
    except FileNotFoundError:
        raise CliError(f"no scenario file or bundled scenario named {name!r}") from None


def load_grid(arg: Optional[str], cfg: dict) -> dict:
    if arg and Path(arg).is_file():
        return json.loads(Path(arg).read_text())
    if arg:
        raise CliError(f"no such grid file: {arg}")
    return defaults.bundled_json(cfg["grid"])


# -- outputs --------------------------------------------------------------------------

def _out_dir(arg: Optional[str]) -> Optional[Path]:
    if not arg:
        return None
    p = Path(arg)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write(dirpath: Optional[Path], name: str, text: str) -> None:
    if dirpath is not None:
        with open(dirpath / name, "w", newline="") as fh:
            fh.write(text)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _f3(x: float) -> str:
    return f"{x:.3f}"


def _form_table(metrics: dict) -> List[str]:
    lines = [f"{'form':<8} {'rmse':>6} {'accuracy':>8}"]
    for form in FORMS:
        m = metrics[form]
        lines.append(f"{form:<8} {_f3(m['rmse']):>6} {_f3(m['accuracy']):>8}")
    return lines


# -- subcommands ----------------------------------------------------------------------

def cmd_calibrate(args, cfg) -> List[str]:
    data = load_data(args.data, cfg)
    rule = delta_rule(args.delta, cfg, data)
    init = PayoffParams.load(args.params) if args.params else None
    opts = defaults.default_fit_options(cfg, seed=args.seed)
    if args.restarts is not None:
        opts = replace(opts, n_restarts=args.restarts)
    forms = FORMS if args.all_forms else [GameForm.parse(args.form).value]
    out = _out_dir(args.out)
    lines, results = [f"encounters {len(data)}  delta {_f3(rule.delta)}"], {}
    for form in forms:
        res = fit_mle(data, form, init, opts, rule)
        results[form] = res
        _write(out, f"params_{form}.params", res.params.dumps())
        _write(out, f"calibration_{form}.json", res.to_json())
    lines.append(f"{'form':<8} {'rmse':>6} {'accuracy':>8} {'loglik':>10} converged")
    for form, res in results.items():
        lines.append(f"{form:<8} {_f3(res.rmse_per_form[form]):>6} {_f3(res.accuracy_per_form[form]):>8} "
                     f"{_f3(res.log_likelihood):>10} {'yes' if res.converged else 'no'}")
    return lines


def cmd_validate(args, cfg) -> List[str]:
    data = load_data(args.data, cfg)
    params = load_params(args.params, cfg)
    rule = delta_rule(args.delta, cfg, data)
    metrics = evaluate_forms(params, data, rule)
    out = _out_dir(args.out)
    rounded = {f: {k: round(v, 6) for k, v in m.items()} for f, m in metrics.items()}
    _write(out, "validation.json", json.dumps(rounded, indent=2, sort_keys=True) + "\n")
    return [f"encounters {len(data)}  delta {_f3(rule.delta)}"] + _form_table(metrics)


def cmd_decide(args, cfg) -> List[str]:
    data = load_data(args.data, cfg)
    params = load_params(args.params, cfg)
    rule = delta_rule(args.delta, cfg, data)
    beliefs = load_beliefs(args.beliefs, cfg)
    rows, skipped, header = [], 0, None
    for item in data:
        enc = item.encounter
        try:
            plan = decide(enc, params, beliefs, rule)
            ok = plan.expected_outcome.value in ("o12", "o21") and deception_success(
                enc, params, plan.expected_outcome, beliefs, rule)
        except KinematicsError as exc:
            log.info("encounter %s skipped: %s", enc.encounter_id, exc)
            skipped += 1
            continue
        row = plan.as_row()
        header = ["encounter_id"] + list(row.keys()) + ["deception_success_flag"]
        rows.append([item.source_id or enc.encounter_id] + list(row.values()) + [str(int(ok))])
    gain = ehmi_gain_census(data, params, rule).summary()
    dec = deception_census(data, params, beliefs, rule).summary()
    out = _out_dir(args.out)
    if rows:
        _write(out, "plans.csv", _csv(header, rows))
    _write(out, "census.json", summary_json({"ehmi_gain": gain, "deception": dec}))
    n = len(data)
    by = dec["deception_success_by_expected"]
    return [
        f"encounters {n}  skipped {skipped}",
        f"ehmi improves total payoff: {gain['n_improved']} ({_f3(100.0 * gain['n_improved'] / n)}%)",
        f"mean total payoff no-ehmi {_f3(gain['mean_total']['no_ehmi'])} ehmi {_f3(gain['mean_total']['ehmi'])}",
        "categories a_up_b_down {a} a_down_b_up {b} both_up {c}".format(
            a=gain["categories"]["a_up_b_down"]["count"], b=gain["categories"]["a_down_b_up"]["count"],
            c=gain["categories"]["both_up"]["count"]),
        f"successful deceptions: {dec['n_deception_success']} ({_f3(100.0 * dec['n_deception_success'] / n)}%)"
        f"  o21 {by['o21']}  o12 {by['o12']}",
    ]


def _pet_lines(rep) -> List[str]:
    s = rep.summary()
    lines = [f"scenario {s['scenario'] or '-'}  expected {s['expected']}"]
    for key in ("no_deception", "deception"):
        r = s[key]
        flag = f"PET<{DANGER_THRESHOLD:g}s" if r["dangerous"] else "safe"
        lines.append(f"{key:<13} PET {_f3(r['pet'])} s  first {r['first']}  {flag}")
    lines.append(f"PET increase {_f3(s['pet_increase'])} s")
    return lines


def cmd_simulate(args, cfg) -> List[str]:
    scen = load_scenario(args.scenario, cfg)
    rep = run_pair(scen)
    out = _out_dir(args.out)
    rows = [[key] + r for key, res in (("no_deception", rep.no_deception), ("deception", rep.deception))
            for r in res.trajectory_rows()]
    _write(out, "trajectories.csv", _csv(["run"] + TRAJECTORY_HEADER, rows))
    _write(out, "pet.json", json.dumps(rep.summary(), indent=2, sort_keys=True) + "\n")
    return _pet_lines(rep)


def cmd_sweep(args, cfg) -> List[str]:
    grid_cfg = load_grid(args.grid, cfg)
    grid = GridSpec.from_dict(grid_cfg)
    base = load_scenario(args.scenario or grid_cfg.get("scenario"), cfg)
    params = load_params(args.params, cfg)
    rule = delta_rule(args.delta, cfg)
    beliefs = load_beliefs(args.beliefs, cfg)
    rep = sweep_initial_states(grid, base, params, beliefs, rule, simulate=not args.no_simulate)
    s = rep.summary()
    out = _out_dir(args.out)
    _write(out, "sweep.csv", rep.to_csv())
    _write(out, "sweep.json", json.dumps(s, indent=2, sort_keys=True) + "\n")
    pr = s["proportion"]
    lines = [f"cells {s['n_cells']}  valid {s['n_valid']}  skipped {s['n_skipped']}",
             f"successful deception {_f3(pr['total'])}%  av-first {_f3(pr['av_first'])}%  "
             f"av-later {_f3(pr['av_later'])}%"]
    if not args.no_simulate:
        lines.append(f"simulated {s['n_simulated']}  PET increased {s['n_pet_increased']}")
    return lines


def cmd_report(args, cfg) -> List[str]:
    data = load_data(args.data, cfg)
    params = load_params(args.params, cfg)
    rule = delta_rule(args.delta, cfg, data)
    beliefs = load_beliefs(args.beliefs, cfg)
    lines = ["== validation"] + _form_table(evaluate_forms(params, data, rule))
    lines.append("== disclosure")
    lines += cmd_decide(args, cfg)[1:]
    pet = pet_shift_census(data, params, beliefs, rule).summary()
    lines.append(f"== PET shift (kinematic, PET<{DANGER_THRESHOLD:g}s subset)")
    for exp in ("o21", "o12"):
        r = pet[exp]
        lines.append(f"{exp} n {r['n_dangerous']}  no-deception {_f3(r['mean_pet_no_deception'])} s  "
                     f"deception {_f3(r['mean_pet_deception'])} s")
    _write(_out_dir(args.out), "pet_shift.json", summary_json(pet))
    return lines


COMMANDS = {"calibrate": cmd_calibrate, "validate": cmd_validate, "decide": cmd_decide,
            "simulate": cmd_simulate, "sweep": cmd_sweep, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ehmi", description="EHMI disclosure game toolkit")
    ap.add_argument("--config", help="defaults file (JSON); the bundled one is used otherwise")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        if data:
            p.add_argument("--data", help="trajectory CSV or encounter CSV")
        p.add_argument("--params", help="payoff parameter file")
        p.add_argument("--delta", help="o11 share in the dual equilibrium, or 'auto'")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("calibrate", help="fit payoff parameters by maximum likelihood")
    common(p)
    p.add_argument("--form", choices=FORMS, default="b-first")
    p.add_argument("--all-forms", action="store_true", help="fit every game form and tabulate them")
    p.add_argument("--restarts", type=int, help="override the number of optimizer restarts")

    p = sub.add_parser("validate", help="RMSE and accuracy of each game form")
    common(p)

    for name, hlp in (("decide", "disclosure plans and censuses"), ("report", "validation, censuses, PET shift")):
        p = sub.add_parser(name, help=hlp)
        common(p)
        p.add_argument("--beliefs", help="belief file (JSON)")

    p = sub.add_parser("simulate", help="scenario with and without deception")
    p.add_argument("--scenario", help="scenario JSON or bundled name (av_first, av_later)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="initial-state grid sweep")
    common(p, data=False)
    p.add_argument("--grid", help="grid JSON")
    p.add_argument("--scenario", help="base scenario (defaults to the grid's)")
    p.add_argument("--beliefs", help="belief file (JSON)")
    p.add_argument("--no-simulate", action="store_true", help="skip PET runs of successful cells")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = defaults.load_defaults(args.config)
        lines = COMMANDS[args.command](args, cfg)
    except (CliError, DataError, EmptyDataset, Degenerate, KinematicsError, NoCrossing, TrackingDiverged,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
