"""streamforge: LLM-assisted streamliner generation and benchmarking for ASP."""

__version__ = "0.1.0"
