"""Monsoon onset forecasting: onset detection, evolving climatology, a
multinomial-logit blend of rainfall forecasts, baselines, verification and a
small decision-theory lab."""

__version__ = "0.1.0"
