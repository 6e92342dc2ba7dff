"""Robust distribution-weighted combination of regressors across source domains."""
