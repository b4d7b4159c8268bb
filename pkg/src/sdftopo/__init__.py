"""Topology-aware segmentation toolkit: signed distance fields, cubical
persistence, diagram-matching losses, metrics and a two-stage refinement demo."""

__version__ = "0.1.0"
