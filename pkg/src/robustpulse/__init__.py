"""Robust composite pulses for parallel single-qubit control."""
