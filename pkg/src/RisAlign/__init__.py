"""
RisAlign - Outage and Diversity Analysis for RIS-Assisted Channels

Models the overall channel of a reconfigurable intelligent surface under four
phase-alignment categories, estimates outage probability and diversity order by
seeded Monte Carlo and by closed-form, asymptotic and Laplace-series methods,
and plans NOMA/TDMA/FDMA power budgets.
"""

__version__ = "0.1.0"
__author__ = "RisAlign Development Team"
__license__ = "MIT"
