"""Hypernetwork mixture-of-experts with latent domain discovery.

The heavy lifting lives in the compiled extension; this package just
re-exports its surface.
"""

from ._core import (
    HmoeError,
    Model,
    accuracy,
    assign_cluster,
    cluster_purity,
    entropy_of,
    evaluate,
    gamma_en,
    gate_values,
    gen_synthetic_domains,
    gen_toy_regression,
    gendata,
    kl_balance_of,
    lambda_grl,
    silhouette,
    train,
)

__all__ = [
    "HmoeError",
    "Model",
    "accuracy",
    "assign_cluster",
    "cluster_purity",
    "entropy_of",
    "evaluate",
    "gamma_en",
    "gate_values",
    "gen_synthetic_domains",
    "gen_toy_regression",
    "gendata",
    "kl_balance_of",
    "lambda_grl",
    "silhouette",
    "train",
]

__version__ = "0.1.0"
