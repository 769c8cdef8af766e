"""
Excitations, noise, ground-truth simulation and record IO.
"""
