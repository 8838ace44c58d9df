"""Genetic-programming implied-volatility models with hedging backtests.

The package evolves closed-form volatility formulas from option quotes
(static or dynamic training-subset selection) and evaluates them inside
delta, delta-gamma and delta-vega self-financing hedges against an
implied-volatility baseline.
"""

from .blackscholes import (ConvergenceError, Greeks, NoRootError, PricingInputs,
                           bs_price, greeks, implied_vol, norm_cdf, norm_pdf)
from .evolution import (CompiledSample, ConfigError, GPConfig, GenerationLog,
                        Individual, RunResult, fitness, mse_total, run,
                        sq_errors, tournament)
from .gptree import (ExprTree, Node, TreeParseError, crossover, eval_tree,
                     format_tree, mutate, parse_tree, random_tree)
from .hedging import (DegenerateHedgeError, HedgePath, HedgeReport, HedgeTrace,
                      OptionHedgeResult, VolSource, build_paths, build_report,
                      resample, run_delta, run_delta_gamma, run_delta_vega,
                      simulate_delta, simulate_delta_gamma, simulate_delta_vega,
                      tracking_error, write_report_csv)
from .kvconfig import KVError, dump_kv, load_kv, parse_kv, write_kv
from .models import (BUILTIN_MODELS, REFERENCE_CALL, REFERENCE_PUT,
                     load_builtin, read_model, write_model)
from .quotes import (OptionQuote, Partition, QuoteParseError,
                     QuoteValidationError, Record, apply_filters,
                     build_partition, classify, classify_values, load_quotes,
                     mid_price, parse_quotes, read_partition, to_records,
                     write_partition, write_quotes_csv)
from .subsetsel import (AdaptiveState, SampleStats, Scheduler, SubsetSchedule,
                        next_adaptive, next_rss, next_sss, reorder,
                        update_weight)
from .synthmarket import MarketSpec, gbm_path, generate_quotes, quote_surface, smile_vol

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
