"""filingswarm: multi-agent question answering over structured fund filings."""

__version__ = "0.1.0"
