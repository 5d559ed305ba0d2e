"""Stepwise uncertainty reduction for excursion sets of vector-valued Gaussian processes."""
