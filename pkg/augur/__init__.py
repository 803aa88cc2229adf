"""
Augur - Time Series Breakpoint Detection Tool
License: GNU GPL

Detects human-specified breakpoints in multichannel time series by learning
window features with a stacked tied-weight autoencoder and picking the peaks
of the consecutive-window feature distance curve. Ships PELT and Bayesian
online changepoint baselines and the evaluation suite used to compare them.
"""

__version__ = '1.0.0'
