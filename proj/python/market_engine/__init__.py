"""Python access to the marketplace engine."""

from ._market import Engine, MarketError, assess, run_load, verify_chain_file

try:
    from ._market import fraud_suite
except ImportError:  # built without the scenario engine
    pass

__all__ = ["Engine", "MarketError", "assess", "run_load", "verify_chain_file", "fraud_suite"]
