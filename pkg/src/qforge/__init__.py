"""Multi-agent quantum code generation pipeline with a surface-code QEC toolkit."""

__version__ = "0.1.0"
