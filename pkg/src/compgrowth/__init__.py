"""Competing first-passage growth on Z^d and in the continuum, with norm
estimation and desk-scale experiments comparing territories with Voronoi
cells of the limiting norm."""
__version__ = "0.1.0"

from .geometry import Norm, SiteConfiguration, voronoi_labels, voronoi_member
from .lattice import EdgeWeightDistribution, PassageTimeField, competing_territories, first_passage_time
from .continuum import RadiusLaw, simulate_outbursts, continuum_passage_time, continuum_territories
from .models import ContinuumModel, LatticeModel
from .norm_estimation import directional_time_constant, fit_norm, kingman_diagnostics, lambda_estimate
from .experiments import (ExperimentPlan, assumption_audit, coexistence_experiment,
                          density_experiment, line_competition_experiment)
