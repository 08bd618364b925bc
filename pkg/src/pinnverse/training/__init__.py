"""Composite physics/data loss and the joint optimization loop."""
