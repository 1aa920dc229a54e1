"""EUREKA: interestingness-first classifiers for tabular data.

This package ranks the features of a tabular classification task by how
interesting a prediction rule built on them would be, as judged by a large
language model through pairwise comparisons, and then trains interpretable
logistic classifiers on the top-K interesting features only.

The package provides:
- CSV ingestion, preprocessing and stratified splitting
- Pairwise interestingness judges (live LLM over HTTP, seeded mock)
- Borda-count and active ranking estimators plus benchmark harnesses
- IRLS logistic regression, group LASSO and likelihood-ratio tests
- The interestingness-first K sweep and accuracy-first baselines
- A command-line interface writing JSON/CSV reports

License: MIT
"""

from .version import __version__

__all__ = ["__version__"]
