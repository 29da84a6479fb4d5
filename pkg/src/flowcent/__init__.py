"""Numerical laboratory for centralizers of fixed-point-free separating flows."""
