"""Rank transmission lines of a linearized power network by overload
probability, estimated from sampled stochastic injections.

Typical use: load a case, build the flow model, draw or read injection
samples, then score lines with one or more estimators.

    from linerank import build_dc_model, load_case39, rank_by_rate
    from linerank.stochastic import default_gaussian_model

    model = build_dc_model(load_case39())
    injections, _ = default_gaussian_model(model, seed=7)
    result = rank_by_rate(model, injections.sample(10_000, seed=7))
    print(result.table.top_k(3))
"""

from .case_io import (
    Branch,
    Bus,
    Generator,
    GridCase,
    dump_case,
    load_case,
    load_case39,
    parse_case,
    susceptance,
)
from .dc_model import DCModel, build_dc_model, pinv_laplacian
from .errors import (
    CaseFormatError,
    DataError,
    LineRankError,
    NetworkError,
    NumericError,
    UsageError,
)
from .ranking import (
    Algorithm,
    CountingResult,
    RateResult,
    RateTracker,
    ScoreTable,
    rank_by_counting,
    rank_by_gaussian,
    rank_by_laplace,
    rank_by_rate,
    rank_lines,
    ranks_from_scores,
    read_scores_csv,
    top_k,
    wilson_interval,
    write_scores_csv,
)
from .ratefn import BACKEND, max_rate, rate_table
from .stochastic import GaussianInjectionModel, LaplaceInjectionModel

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "BACKEND",
    "Branch",
    "Bus",
    "CaseFormatError",
    "CountingResult",
    "DCModel",
    "DataError",
    "GaussianInjectionModel",
    "Generator",
    "GridCase",
    "LaplaceInjectionModel",
    "LineRankError",
    "NetworkError",
    "NumericError",
    "RateResult",
    "RateTracker",
    "ScoreTable",
    "UsageError",
    "build_dc_model",
    "dump_case",
    "load_case",
    "load_case39",
    "max_rate",
    "parse_case",
    "pinv_laplacian",
    "rank_by_counting",
    "rank_by_gaussian",
    "rank_by_laplace",
    "rank_by_rate",
    "rank_lines",
    "ranks_from_scores",
    "rate_table",
    "read_scores_csv",
    "susceptance",
    "top_k",
    "wilson_interval",
    "write_scores_csv",
    "__version__",
]
