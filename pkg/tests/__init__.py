from . import test_config, test_estimation, test_fields, test_fock, test_simulation
from .synthetic import fringe_dataset, make_fit
