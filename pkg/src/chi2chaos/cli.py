"""Config-driven experiment runner.

A scenario names a target law, a parametrized kernel family f_n, the index
set to sweep, and which metrics to report.  For each n the runner evaluates
the exact criterion (cumulant gaps and the gamma statistic), optionally the
order-q contraction conditions, and optionally Monte Carlo validation
(empirical cumulants and the Kolmogorov distance to the target CDF).  Exact
columns are bitwise reproducible; Monte Carlo columns are reproducible given
the seed, which is offset by the index position to give each n its own
substream.

Exit codes: 0 success, 2 configuration error, 3 numerical-guard abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import criteria, montecarlo, sym_tensor
from .chaos import ChaosExpansion
from .errors import ConfigError, NumericalError, ResourceGuardError
from .montecarlo import TargetLaw
from .spectral2 import TargetSpec
from .sym_tensor import SymmetricKernel

KNOWN_FAMILIES = ("diag", "equal-split", "rank-one-difference")
KNOWN_OUTPUTS = ("cumulant_gaps", "gamma_stat", "ks", "empirical_cumulants",
                 "q_chaos")
METRIC_LABELS = {
    "gamma_stat": "unconditional (sufficient)",
    "distance": "kolmogorov",
}


@dataclass(frozen=True)
class Scenario:
    id: str
    target: TargetSpec
    family: dict
    indices: tuple
    mc_samples: int
    mc_seed: int
    outputs: tuple


def _family_diagnostics(family) -> list:
    out = []
    if not isinstance(family, dict) or "name" not in family:
        return ["family: must be an object with a 'name' field"]
    name = family["name"]
    if name not in KNOWN_FAMILIES:
        return [f"family.name: unknown family {name!r} "
                f"(known: {', '.join(KNOWN_FAMILIES)})"]
    if name == "diag":
        entries = family.get("entries")
        if (not isinstance(entries, list) or not entries
                or not all(isinstance(e, list) and len(e) == 2 for e in entries)):
            out.append("family.entries: expected a nonempty list of "
                       "[base, perturbation] pairs")
    elif name == "equal-split":
        if family.get("signs", "alternating") not in ("alternating", "positive"):
            out.append("family.signs: expected 'alternating' or 'positive'")
    elif name == "rank-one-difference":
        scale = family.get("scale", 0.5)
        if not isinstance(scale, (int, float)) or scale == 0:
            out.append("family.scale: expected a nonzero number")
    return out


def config_diagnostics(doc) -> list:
    """Schema and invariant report for a parsed config; empty means valid."""
    out = []
    if not isinstance(doc, dict):
        return ["config: top-level JSON object expected"]
    if not isinstance(doc.get("id"), str) or not doc.get("id"):
        out.append("id: nonempty string required")
    target = doc.get("target")
    if not isinstance(target, dict) or "alphas" not in target:
        out.append("target: object with an 'alphas' list required")
    else:
        try:
            TargetSpec(tuple(target["alphas"]))
        except (ConfigError, TypeError) as exc:
            out.append(f"target.{exc}")
    out.extend(_family_diagnostics(doc.get("family")))
    indices = doc.get("indices")
    if not isinstance(indices, list) or not indices:
        out.append("indices: nonempty list required")
    else:
        for i, n in enumerate(indices):
            if not isinstance(n, int) or n < 1:
                out.append(f"indices[{i}]: positive integer required, got {n!r}")
                break
            if i > 0 and n <= indices[i - 1]:
                out.append(f"indices[{i}]: must be strictly increasing "
                           f"({n} follows {indices[i - 1]})")
                break
    mc = doc.get("mc", {})
    if not isinstance(mc, dict):
        out.append("mc: object expected")
    else:
        if not isinstance(mc.get("samples", 1), int) or mc.get("samples", 1) < 1:
            out.append("mc.samples: positive integer required")
        if not isinstance(mc.get("seed", 0), int):
            out.append("mc.seed: integer required")
    outputs = doc.get("outputs", [])
    for name in outputs:
        if name not in KNOWN_OUTPUTS:
            out.append(f"outputs: unknown metric {name!r} "
                       f"(known: {', '.join(KNOWN_OUTPUTS)})")
    if "q_chaos" in outputs and isinstance(target, dict):
        alphas = target.get("alphas", [])
        if isinstance(alphas, list) and len(alphas) != 2:
            out.append("outputs: 'q_chaos' requires a two-weight target")
    return out


def validate_config(path) -> list:
    """Diagnostics for a config file without running it."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        return [f"config: cannot read {path}: {exc}"]
    except json.JSONDecodeError as exc:
        return [f"config: invalid JSON: {exc}"]
    return config_diagnostics(doc)


def load_config(path) -> Scenario:
    with open(path) as fh:
        doc = json.load(fh)
    problems = config_diagnostics(doc)
    if problems:
        raise ConfigError("; ".join(problems))
    mc = doc.get("mc", {})
    return Scenario(
        id=doc["id"],
        target=TargetSpec(tuple(doc["target"]["alphas"])),
        family=doc["family"],
        indices=tuple(doc["indices"]),
        mc_samples=int(mc.get("samples", 100_000)),
        mc_seed=int(mc.get("seed", 0)),
        outputs=tuple(doc.get("outputs", ())),
    )


def family_kernel(family: dict, n: int) -> SymmetricKernel:
    """Construct the order-2 scenario kernel f_n from its family parameters."""
    name = family["name"]
    if name == "diag":
        vals = [base + pert / n for base, pert in family["entries"]]
        return SymmetricKernel(2, len(vals), np.diag(vals))
    if name == "equal-split":
        sym_tensor._check_guard(2, n)  # kernel dimension grows with n
        mag = 1.0 / math.sqrt(2.0 * n)
        if family.get("signs", "alternating") == "alternating":
            vals = [mag if i % 2 == 0 else -mag for i in range(n)]
        else:
            vals = [mag] * n
        return SymmetricKernel(2, n, np.diag(vals))
    if name == "rank-one-difference":
        scale = float(family.get("scale", 0.5))
        c = 1.0 / n
        u = np.array([1.0, 0.0])
        v = np.array([c, math.sqrt(1.0 - c * c)])
        return SymmetricKernel(2, 2, scale * (np.outer(u, u) - np.outer(v, v)))
    raise ConfigError(f"family.name: unknown family {name!r}")


def _columns(scenario: Scenario, with_mc: bool) -> list:
    cols = ["n"]
    cols += [f"kappa_gap_{r}" for r in range(2, scenario.target.k + 2)]
    cols.append("gamma_stat")
    if with_mc and "ks" in scenario.outputs:
        cols.append("ks")
    if with_mc and "empirical_cumulants" in scenario.outputs:
        cols += ["emp_kappa_2", "emp_kappa_3", "emp_kappa_4"]
    if "q_chaos" in scenario.outputs:
        sample = criteria.q_chaos_conditions(
            family_kernel(scenario.family, scenario.indices[0]), scenario.target)
        cols += [f"cond_{key}" for key in sample]
    return cols


def run_scenario(config_path, out_dir, mc_samples=None, seed=None,
                 no_mc: bool = False):
    """Run one scenario end to end; returns (csv_path, summary_path)."""
    scenario = load_config(config_path)
    if mc_samples is not None:
        scenario = dataclasses.replace(scenario, mc_samples=int(mc_samples))
    if seed is not None:
        scenario = dataclasses.replace(scenario, mc_seed=int(seed))
    with_mc = not no_mc
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    law = TargetLaw(scenario.target) if with_mc and "ks" in scenario.outputs else None
    try:
        columns = _columns(scenario, with_mc)
    except (ResourceGuardError, NumericalError) as exc:
        raise type(exc)(f"scenario {scenario.id!r} aborted at "
                        f"n={scenario.indices[0]}: {exc}")
    rows = []
    for position, n in enumerate(scenario.indices):
        try:
            kernel = family_kernel(scenario.family, n)
            F = ChaosExpansion.from_kernel(kernel)
            report = criteria.criterion_statistic(F, scenario.target)
            row = {"n": n, "gamma_stat": report.gamma_stat}
            for (r, _, _, gap) in report.cumulant_gaps:
                row[f"kappa_gap_{r}"] = gap
            if "q_chaos" in scenario.outputs:
                for key, val in criteria.q_chaos_conditions(
                        kernel, scenario.target).items():
                    row[f"cond_{key}"] = val
            if with_mc and ("ks" in scenario.outputs
                            or "empirical_cumulants" in scenario.outputs):
                batch = montecarlo.sample_chaos(
                    F, scenario.mc_samples, scenario.mc_seed + position)
                if "ks" in scenario.outputs:
                    row["ks"] = montecarlo.kolmogorov_distance(
                        batch.values, law.cdf_batch)
                if "empirical_cumulants" in scenario.outputs:
                    emp = montecarlo.k_statistics(batch, 4)
                    row["emp_kappa_2"] = emp[1]
                    row["emp_kappa_3"] = emp[2]
                    row["emp_kappa_4"] = emp[3]
        except (ResourceGuardError, NumericalError) as exc:
            raise type(exc)(f"scenario {scenario.id!r} aborted at n={n}: {exc}")
        rows.append(row)

    csv_path = out_dir / f"{scenario.id}.csv"
    with open(csv_path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_format(row.get(c)) for c in columns) + "\n")

    summary = {
        "id": scenario.id,
        "indices": list(scenario.indices),
        "columns": columns,
        "labels": dict(METRIC_LABELS),
        "mc": None if not with_mc else
            {"samples": scenario.mc_samples, "seed": scenario.mc_seed,
             "generator_id": montecarlo.GENERATOR_ID},
        "metrics": {},
        "final": {c: rows[-1].get(c) for c in columns},
    }
    for metric in ("gamma_stat", "ks"):
        if metric not in columns:
            continue
        vals = [row[metric] for row in rows]
        decreased = [bool(b < a) for a, b in zip(vals, vals[1:])]
        summary["metrics"][metric] = {
            "values": vals,
            "decreased_at_step": decreased,
            "monotone_decreasing": all(decreased),
        }
    summary_path = out_dir / f"{scenario.id}_summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, summary_path


def _format(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def shipped_scenarios() -> dict:
    """Map scenario id -> packaged config path."""
    base = resources.files("chi2chaos") / "scenarios"
    out = {}
    for entry in sorted(base.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = Path(str(entry))
    return out


def resolve_config(name_or_path) -> Path:
    """Treat the argument as a path first, then as a shipped scenario id."""
    p = Path(name_or_path)
    if p.exists():
        return p
    shipped = shipped_scenarios()
    if str(name_or_path) in shipped:
        return shipped[str(name_or_path)]
    raise ConfigError(f"config: no file or shipped scenario named {name_or_path!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chi2chaos",
        description="Evaluate chi-squared-combination convergence criteria "
                    "over kernel-sequence scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("config", help="config path or shipped scenario id")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--mc-samples", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--no-mc", action="store_true")

    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("config")

    sub.add_parser("list-scenarios", help="list the shipped scenarios")

    args = parser.parse_args(argv)

    if args.command == "list-scenarios":
        for name, path in shipped_scenarios().items():
            print(f"{name}\t{path}")
        return 0

    if args.command == "validate":
        try:
            path = resolve_config(args.config)
        except ConfigError as exc:
            print(exc, file=sys.stderr)
            return 2
        problems = validate_config(path)
        if problems:
            for line in problems:
                print(line, file=sys.stderr)
            return 2
        print("ok")
        return 0

    try:
        path = resolve_config(args.config)
        csv_path, summary_path = run_scenario(
            path, args.out, mc_samples=args.mc_samples, seed=args.seed,
            no_mc=args.no_mc)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (ResourceGuardError, NumericalError) as exc:
        print(exc, file=sys.stderr)
        return 3
    print(csv_path)
    print(summary_path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
