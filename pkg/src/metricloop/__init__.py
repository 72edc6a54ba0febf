"""Closed-loop harness that separates whether an agent's interventions work from
whether its stated explanations for them hold up."""

__version__ = "0.1.0"
