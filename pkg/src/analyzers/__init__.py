"""
Ranking metrics for next-activity predictions.
"""

from .evaluation import AggregateReport, EvalReport, accuracy_at_k, aggregate_runs

__all__ = ['AggregateReport', 'EvalReport', 'accuracy_at_k', 'aggregate_runs']
