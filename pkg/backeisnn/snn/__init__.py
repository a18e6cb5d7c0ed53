"""Spiking network layers, rollout and metrics."""
