from .array import ArrayConfig, UserLocation
from .codebook import Codebook, load_codebook, predict_weights
from .lcmv import BeamWeights, NcbfScenario, build_constraints, solve_lcmv
from .partition import PartitionSpec, SectorGrid, build_grid, locate
