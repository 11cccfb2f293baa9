"""Shared test helpers: in-process CLI runner and small scenario configs."""
import json
from pathlib import Path

import pytest

from swarmtrack.cli import main as cli_main


def invoke_cli(*argv) -> int:
    """Run the CLI in process. argparse exits are folded into the code."""
    try:
        return cli_main([str(a) for a in argv])
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0


@pytest.fixture
def run_cli(capsys):
    """In-process CLI runner returning (exit_code, stdout, stderr)."""

    def run(*argv):
        code = invoke_cli(*argv)
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return run


def small_scenario(**overrides) -> dict:
    """A 3 second hover over a static blob; renders in well under a second."""
    cfg = {
        "duration": 45,
        "fps": 15.0,
        "width": 320,
        "height": 180,
        "focal_px": 350.0,
        "drone": {"waypoints": [[0.0, 0.0]], "altitude": 60.0, "speed": 1.5},
        "swarm": {"waypoints": [[0.0, 0.0]], "speed": 0.0},
        "shape": {"semi_major": 6.0, "semi_minor": 4.0},
        "mask_softness": 1.5,
        "seed": 3,
    }
    cfg.update(overrides)
    return cfg


def small_run_config(**overrides) -> dict:
    cfg = {
        "fps": 15.0,
        "focal_px": 350.0,
        "tracker": {"n_particles": 500, "motion_noise_sigma": 5.0, "seed": 0},
        "alpha_px": 8.0,
    }
    cfg.update(overrides)
    return cfg


def write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path
