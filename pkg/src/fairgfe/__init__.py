"""Group-mean fairness constraints for tree ensembles and kernel regressors."""

__version__ = "0.1.0"
