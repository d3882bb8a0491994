"""Research harness engine: skill workflows, cross-model review loops, claim assurance, wiki memory and figures."""

__version__ = "0.1.0"
