"""Measured graded posets, higher-order random walks and their spectra."""
