"""Chemometrics toolkit for grape-juice UV-Vis spectra.

Predicts sensory scores (regression) and origin (classification) from
absorbance spectra with linear SVMs, random forests and small neural
networks, evaluated by leave-one-sample-out and leave-one-juice-out
cross-validation.
"""

__version__ = "0.1.0"
