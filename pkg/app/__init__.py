"""Sm-Nd isotope table mining from PDF literature."""
