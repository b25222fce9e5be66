from .param_opt import SearchSpec, evaluate_point, optimize_intensities

__all__ = ["SearchSpec", "evaluate_point", "optimize_intensities"]
