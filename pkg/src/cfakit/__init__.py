"""Causal fairness analysis toolkit.

Simulates structural causal models, evaluates the TV family of fairness
measures exactly by Monte Carlo, estimates them from data, runs the
disparate treatment/impact cookbook, and fits causally constrained
predictors.
"""
from .dataset import Dataset
from .kernels import BACKEND

__version__ = "0.1.0"
