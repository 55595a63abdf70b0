"""
SPE process monitor - next-activity prediction for business process event logs.

This package trains decoder-only transformers over event-log traces and compares
sinusoidal positional encodings with structural encodings derived from the
Laplacian eigenvectors of a process ontology graph.
"""

__version__ = "1.0.0"
__author__ = "SPE Process Monitor Team"
__email__ = "support@example.com"

from .process_monitor import ProcessMonitor

__all__ = ["ProcessMonitor"]
