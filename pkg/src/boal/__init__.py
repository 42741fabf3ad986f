"""Budgeted online active learning toolkit.

Selects, under a strict query budget over a finite horizon, when to request
labels from a data stream: a Hedge-weighted expert committee supplies
predictions and disagreement scores, and per-segment stopping rules (secretary,
prophet-secretary, empirical threshold selection) decide query timing, with
episodic priors informing the threshold-based rules.
"""

__version__ = "0.1.0"
