"""
Run orchestration: simulate, identify, parameter sweeps and reports.
"""
