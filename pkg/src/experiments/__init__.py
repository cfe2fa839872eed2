"""
Initialization file for experiments package.
"""
from .families import FamilyMember, family_members, schwarzschild, bump, composite
from .runner import ScenarioRunner, SweepTable, load_scenario, run_scenario, fit_power, delta_thresholds
from .checks import CheckResult, check_all

__all__ = [
    'FamilyMember',
    'family_members',
    'schwarzschild',
    'bump',
    'composite',
    'ScenarioRunner',
    'SweepTable',
    'load_scenario',
    'run_scenario',
    'fit_power',
    'delta_thresholds',
    'CheckResult',
    'check_all'
]
