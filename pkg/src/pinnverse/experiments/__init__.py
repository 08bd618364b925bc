"""Experiment scenarios and the sweep worker pool."""
