"""Experiment driver: corpora, splits, evaluation, sweeps and the command line."""
