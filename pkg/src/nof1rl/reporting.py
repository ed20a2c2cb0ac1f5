"""Batch driver: simulate scenario/design cells and write CSV/JSON outputs."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .core import ActionSet
from .environment import Scenario
from .metrics import ScenarioSummary, regret_quantiles, summarize
from .trial import Design, TrialConfig, TrialError, TrialResult, simulate_patient

log = logging.getLogger(__name__)

STEP_COLUMNS = (
    "patient_id", "scenario", "design", "phase", "t", "action_index", "type_id", "intensity",
    "duration_norm", "pain_before", "delta_pain_adaptive", "delta_pain_fixed_counterfactual",
    "fed_back", "selection_prob_chosen", "max_prob", "min_prob",
)
QUANTILE_COLUMNS = ("scenario", "design", "t", "median", "q25", "q75")
TABLE_COLUMNS = ("Scenario", "Design", "Regret mean", "Regret q0.75", "Entropy type",
                 "SD duration", "SD intensity", "Max prob", "Min prob")
FAILURE_FILE = "FAILED.json"


@dataclass
class RunManifest:
    out_dir: Path
    scenarios: Sequence[Scenario] = tuple(Scenario)
    designs: Sequence[Design] = tuple(Design)
    patients: int = 100
    root_seed: int = 0
    jobs: int = 1
    trial: TrialConfig = field(default_factory=TrialConfig)
    config_path: Path | None = None

    def __post_init__(self):
        if self.patients < 1:
            raise ValueError("patient count must be at least 1")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        self.out_dir = Path(self.out_dir)
        self.scenarios = sorted({Scenario(s) for s in self.scenarios}, key=lambda s: s.index)
        self.designs = sorted({Design(d) for d in self.designs}, key=lambda d: d.value)

    def cell_config(self, scenario: Scenario, design: Design) -> TrialConfig:
        return replace(self.trial, scenario=scenario, design=design, root_seed=self.root_seed)


def _simulate(args):
    patient_id, cfg = args
    try:
        return simulate_patient(patient_id, cfg)
    except TrialError as exc:
        return exc


def simulate_cell(cfg: TrialConfig, patients: int, jobs: int = 1):
    """Run ``patients`` trials; returns (results by patient id, failures)."""
    tasks = [(i, cfg) for i in range(patients)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_simulate, tasks, chunksize=max(1, patients // (4 * jobs))))
    else:
        outcomes = [_simulate(t) for t in tasks]
    results = sorted((o for o in outcomes if isinstance(o, TrialResult)),
                     key=lambda r: r.patient_id)
    failures = [o for o in outcomes if isinstance(o, TrialError)]
    return results, failures


def step_rows(result: TrialResult, action_set: ActionSet) -> list[dict]:
    """Rows of steps.csv for one patient.

    Baseline and phase-A rows carry their realized reduction in the fixed
    column and leave the adaptive and probability columns empty.
    """
    base = {"patient_id": result.patient_id, "scenario": result.scenario.value,
            "design": result.design.value}
    rows = []
    for rec in result.pre_b_records:
        a = action_set[rec.action_index]
        rows.append({**base, "phase": rec.phase.value, "t": rec.t,
                     "action_index": rec.action_index, "type_id": a.type_id,
                     "intensity": a.intensity, "duration_norm": a.duration_norm,
                     "pain_before": rec.context.pain, "delta_pain_adaptive": "",
                     "delta_pain_fixed_counterfactual": rec.delta_pain,
                     "fed_back": int(rec.fed_back), "selection_prob_chosen": "",
                     "max_prob": "", "min_prob": ""})
    for rec, fixed, dec in zip(result.adaptive_records, result.counterfactual_fixed_deltas,
                               result.decisions):
        a = action_set[rec.action_index]
        rows.append({**base, "phase": rec.phase.value, "t": rec.t,
                     "action_index": rec.action_index, "type_id": a.type_id,
                     "intensity": a.intensity, "duration_norm": a.duration_norm,
                     "pain_before": rec.context.pain, "delta_pain_adaptive": rec.delta_pain,
                     "delta_pain_fixed_counterfactual": fixed, "fed_back": int(rec.fed_back),
                     "selection_prob_chosen": float(dec.selection_probs[dec.chosen_index]),
                     "max_prob": float(dec.selection_probs.max()),
                     "min_prob": float(dec.selection_probs.min())})
    return rows


def _fmt(v) -> str:
    # repr round-trips floats, so files are byte-stable across runs
    return repr(float(v)) if isinstance(v, float) else str(v)


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def emit_summary_table(cells: Sequence[ScenarioSummary]) -> str:
    """Plain-text table, rows ordered by scenario then A-B before B-A, two decimals."""
    if not cells:
        raise ValueError("no summary cells")
    ordered = sorted(cells, key=lambda c: (c.scenario.index, c.design.value))
    lines = [" | ".join(TABLE_COLUMNS)]
    for c in ordered:
        vals = (c.mean_regret, c.regret_q75, c.entropy_type, c.std_duration, c.std_intensity,
                c.mean_max_prob, c.mean_min_prob)
        # avoid printing "-0.00"
        nums = [f"{v:.2f}" if round(v, 2) != 0 else "0.00" for v in vals]
        design = {"AB": "A-B", "BA": "B-A"}[c.design.value]
        lines.append(" | ".join([c.scenario.value, design, *nums]))
    return "\n".join(lines) + "\n"


def run_all(manifest: RunManifest) -> int:
    """Simulate every selected cell and write the outputs; returns an exit status."""
    out = manifest.out_dir
    out.mkdir(parents=True, exist_ok=True)
    action_set = manifest.trial.action_set
    steps, quantiles, summaries, fixed_refs, failures = [], [], [], [], []

    for scenario in manifest.scenarios:
        for design in manifest.designs:
            cfg = manifest.cell_config(scenario, design)
            log.info("simulating scenario %s, design %s, %d patients", scenario.value,
                     design.value, manifest.patients)
            results, failed = simulate_cell(cfg, manifest.patients, manifest.jobs)
            failures += [{"scenario": scenario.value, "design": design.value,
                          "patient_id": f.patient_id, "step": f.step, "error": str(f)}
                         for f in failed]
            for r in results:
                steps += step_rows(r, action_set)
            if not results:
                continue
            summaries.append(summarize(results, action_set))
            fixed_refs.append(summarize(results, action_set, arm="fixed"))
            quantiles += [{"scenario": scenario.value, "design": design.value, **row}
                          for row in regret_quantiles(results)]

    _write_csv(out / "steps.csv", STEP_COLUMNS, steps)
    _write_csv(out / "regret_quantiles.csv", QUANTILE_COLUMNS, quantiles)
    summary = {
        "root_seed": manifest.root_seed,
        "patients": manifest.patients,
        "cells": [s.to_dict() for s in summaries],
        "fixed_arm": [s.to_dict() for s in fixed_refs],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if summaries:
        (out / "summary.txt").write_text(emit_summary_table(summaries))

    sidecar = out / FAILURE_FILE
    if failures:
        sidecar.write_text(json.dumps(failures, indent=2) + "\n")
        log.error("%d patient simulations failed; see %s", len(failures), sidecar)
        return 1
    if sidecar.exists():
        sidecar.unlink()
    return 0
