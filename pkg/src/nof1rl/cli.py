"""Command-line entry point: ``nof1rl-sim``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .agent import SamplerConfig
from .core import ActionSet, default_action_set
from .environment import Scenario
from .reporting import RunManifest, run_all
from .trial import Design, TrialConfig

DEFAULTS = {
    "scenario": "all",
    "design": "all",
    "patients": 100,
    "seed": 0,
    "out": "results",
    "jobs": 1,
}
TRIAL_KEYS = ("baseline_days", "phase_days", "decisions_per_day")


def load_config(path) -> dict:
    """Read a YAML (or JSON) run configuration; missing keys take defaults."""
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: configuration must be a mapping")
    return data


def build_manifest(args: argparse.Namespace) -> RunManifest:
    config = load_config(args.config) if args.config else {}
    opts = {**DEFAULTS, **{k: v for k, v in config.items() if k in DEFAULTS}}
    opts.update({k: v for k, v in vars(args).items() if k in DEFAULTS and v is not None})

    sampler = SamplerConfig(**config.get("sampler", {}))
    actions = (ActionSet.from_records(config["actions"]) if "actions" in config
               else default_action_set())
    trial = TrialConfig(sampler=sampler, action_set=actions,
                        **{k: v for k, v in config.get("trial", {}).items() if k in TRIAL_KEYS})
    scenario, design = str(opts["scenario"]), str(opts["design"]).replace("-", "")
    return RunManifest(
        out_dir=Path(opts["out"]),
        scenarios=tuple(Scenario) if scenario == "all" else (Scenario(scenario),),
        designs=tuple(Design) if design == "all" else (Design(design),),
        patients=int(opts["patients"]),
        root_seed=int(opts["seed"]),
        jobs=int(opts["jobs"]),
        trial=trial,
        config_path=Path(args.config) if args.config else None,
    )


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nof1rl-sim",
        description="Simulate the adaptive N-of-1 exercise trial across scenarios and designs.")
    p.add_argument("--config", help="YAML/JSON run configuration")
    p.add_argument("--scenario", choices=[s.value for s in Scenario] + ["all"])
    p.add_argument("--design", choices=["AB", "BA", "A-B", "B-A", "all"])
    p.add_argument("--patients", type=int, help="patients per cell (default 100)")
    p.add_argument("--seed", type=int, help="root seed (default 0)")
    p.add_argument("--out", help="output directory (default ./results)")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        manifest = build_manifest(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"nof1rl-sim: {exc}", file=sys.stderr)
        return 2
    status = run_all(manifest)
    if status == 0 and (manifest.out_dir / "summary.txt").exists():
        sys.stdout.write((manifest.out_dir / "summary.txt").read_text())
    return status


if __name__ == "__main__":
    sys.exit(main())
