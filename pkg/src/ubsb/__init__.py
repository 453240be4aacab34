"""Bureau-free credit scoring bench: synthetic borrower profiles, an
alternative-data uplift study across six model families, and counterfactual
recourse audits."""

__version__ = "0.1.0"
