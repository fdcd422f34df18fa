"""diagnosys: a conversational diagnostic engine with explainable scoring."""

__version__ = "0.1.0"
