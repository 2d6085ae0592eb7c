"""Rubric extraction from pairwise preferences with coding-rate core-set selection."""
from .coding_rate import CodingRateParams, candidate_gains, coding_rate, marginal_gain, normalize_columns
from .errors import (
    CheckpointError,
    ConfigError,
    GenerationError,
    InputError,
    JudgmentError,
    NumericalError,
    ProtocolError,
    RubricError,
    StructuringError,
    TransportError,
)
from .records import Judgment, PreferencePair, Rubric, Theme, ThemeTipsRubric
from .selection import CoreSet, SelectionConfig, SelectionTrace, early_stop_check, greedy_select, update_core
from .refinement import RefinementOutcome, judge, propose, refine_pair, revise
from .pipeline import ExtractionResult, PipelineConfig, run_extraction, structure_core
from .diagnostics import RubricDiagnostics, VotingConfig, contribution, coverage, diagnose_all, precision, set_accuracy

__version__ = "0.1.0"
