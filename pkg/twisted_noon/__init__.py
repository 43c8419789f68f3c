# -*- coding: utf-8 -*-

"""

Twisted N00N Rotation Metrology

------------------

Welcome to the twisted_noon library!

Simulates rotation measurements with orbital-angular-momentum N00N states
and runs the analysis chain: fringe fits, Fisher information, Cramer-Rao
comparison and sensitivity scaling.

"""
__version__ = "0.1.0"

from .estimation import (
    angular_uncertainty,
    crb_check,
    fisher_information,
    fit_fringe,
    fit_hom_dip,
    sensitivity_table,
)
from .export import writers
from .fields import Grid, export_hologram, rotate_field, synth_oam, synth_petal
from .fock import (
    ModeKind,
    ModeLabel,
    ModeUnitary,
    TwoModeFockState,
    analytic_prediction,
    hadamard_mub,
    lift_and_apply,
    make_noon,
    projection_probability,
    rotation_unitary,
)
from .simulation import (
    LossModel,
    ScanDataset,
    Scheme,
    SourceModel,
    coincidence_probability,
    hom_scan,
    simulate_scan,
    witness_scan,
)
