"""Simulation and analysis toolkit for closed-loop AI-user systems:
stochastic feedback-loop dynamics, ergodicity diagnostics, equal-treatment
and equal-impact metrics, and a desk-scale credit-scoring case study."""

__version__ = "0.1.0"
