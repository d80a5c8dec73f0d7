"""Spectrum-adaptive generalization bounds for transformers.

Measures Schatten norms of trained weight matrices, evaluates the post hoc
bound with per-matrix index selection and compares it against the
spectral-norm baselines. The command-line host is ``schatten_cli.py``;
weight sources it reads from live in the top-level ``providers`` package.
"""
