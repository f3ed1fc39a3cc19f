"""Belief-propagation, neural BP (feed-forward and recurrent) and mRRD decoders for binary linear codes."""

__version__ = "0.1.0"
