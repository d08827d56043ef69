"""HTTP service exposing the sampler, the gap estimator, and the demos."""

from .app import create_app

__all__ = ["create_app"]
