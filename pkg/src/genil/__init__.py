"""Genetic reproduction of demonstrations, ranking-loss reward inference,
and policy derivation on toy environments with known ground-truth rewards."""

__version__ = "0.1.0"
