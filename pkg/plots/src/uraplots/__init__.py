"""Static figure generation for the delay-Doppler unsourced-access
simulator's CSV/JSON result files."""

from .figures import plot_miss_detection, plot_required_ebn0, required_ebn0_curve
from .io import ResultSet, load_results

__version__ = "0.1.0"

__all__ = [
    "ResultSet",
    "load_results",
    "plot_miss_detection",
    "plot_required_ebn0",
    "required_ebn0_curve",
    "__version__",
]
