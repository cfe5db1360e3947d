#!/usr/bin/env python3
"""
Simulated active 3D scanning: occupancy mapping, a diffusion scanning
policy, path refinement, baselines and the evaluation harness.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""
from .main.config import ScenarioConfig, TrainingConfig, load_scenario, load_training
from .main.episode import RunRecord, run_episode
from .main.suite import run_suite
