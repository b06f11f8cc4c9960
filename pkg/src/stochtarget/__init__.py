"""Learning multi-period allocation policies that outperform a stochastic constant-proportion benchmark."""

__version__ = "0.1.0"
