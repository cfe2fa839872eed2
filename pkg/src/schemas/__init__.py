"""
Initialization file for schemas package.
"""
from .models import (
    HarmonicRecord,
    RadialMetricHeader,
    MassReportRecord,
    FlowSummaryRecord,
    FlattenRecord,
    Scenario,
    FamilyKind,
    SweepRow,
    SweepSummaryRecord,
    DeltaThreshold,
    FamilySpec,
    GridSpec,
    SweepSpec,
)

__all__ = [
    'HarmonicRecord',
    'RadialMetricHeader',
    'MassReportRecord',
    'FlowSummaryRecord',
    'FlattenRecord',
    'Scenario',
    'FamilyKind',
    'SweepRow',
    'SweepSummaryRecord',
    'DeltaThreshold',
    'FamilySpec',
    'GridSpec',
    'SweepSpec',
]
