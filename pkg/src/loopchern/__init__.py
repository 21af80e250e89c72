"""Numerical Chern, Chern-Simons, and Bismut-Chern forms on loops in unitary
groups, with a verification suite for their closure, restriction, additivity,
and transgression identities."""

from .matrices import expm, path_ordered_exp, block_diag, cmat_to_json, cmat_from_json
from .quadrature import QuadratureSpec, iterated_integral
from .loops import (
    UnitaryLoop, ConstantLoop, ExpLoop, DeformedLoop, FourierLoop, TangentField,
    exp_loop, constant_loop, direct_sum, concat, loop_inverse, loop_product,
    tabulated_loop, loop_from_config,
)
from .connections import (
    ConnectionData, ConnectionPath, gauge_path_connection, grassmann_connection,
    ProjectorFamily,
)
from .formeval import (
    Slot, SlotSequence, eval_slot_sequence, contract_rotation, pullback_to_plot,
    fd_exterior_derivative,
)
from .forms import (
    FormSpec, build_form_spec, ch_odd, ch_odd_at, cs_odd, winding_number,
    tr_hol_even, bcs_even, bch_odd, bcs_odd,
)

__version__ = "0.1.0"
