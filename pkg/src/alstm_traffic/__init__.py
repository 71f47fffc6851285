"""Attention-based LSTM (A-LSTM) and LSTM forecasters for traffic volume and speed.

Everything numeric is plain numpy with hand-written backward passes.
"""

__version__ = "0.1.0"
