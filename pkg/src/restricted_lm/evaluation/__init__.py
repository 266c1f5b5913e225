from .predictive import PredictiveDensity, group_predictive, kl_good_data, predictive_density
from .simulation import FITTERS, KLReport, SimulationDesign, run_simulation_study, simulate_contaminated
from .tlm import TLMReport, crossval_split, tlm_score

__all__ = [
    "FITTERS", "KLReport", "PredictiveDensity", "SimulationDesign", "TLMReport",
    "crossval_split", "group_predictive", "kl_good_data", "predictive_density",
    "run_simulation_study", "simulate_contaminated", "tlm_score",
]
