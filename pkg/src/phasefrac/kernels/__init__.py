"""Hot per-integration-point kernels with runtime backend dispatch.

``numpy_impl`` is always importable; ``numba_impl`` compiles the same
formulas into per-point loops.  The active implementation is chosen once
at import through :mod:`phasefrac.backend` and exposed here under neutral
names.  Both backends share call signatures, and the criterion is encoded
as an integer (0 = r1, 1 = dp) so the kernels stay free of Python objects.
"""

from .. import backend
from ..constitutive import MaterialParams

CRIT_R1 = 0
CRIT_DP = 1


def pack_params(params: MaterialParams):
    """Flatten MaterialParams into the scalar tuple the kernels take."""
    crit = CRIT_R1 if params.criterion == "r1" else CRIT_DP
    return (
        params.moduli.K,
        params.moduli.mu,
        params.f_t,
        params.f_s,
        params.kappa,
        params.kappa_t,
        params.compressive_penalty,
        params.eps_ref,
        crit,
    )


from . import numpy_impl  # noqa: E402

if backend.USE_NUMBA:
    from . import numba_impl as _impl  # noqa: E402
else:
    _impl = numpy_impl

return_map_batch = _impl.return_map_batch
momentum_kernel = _impl.momentum_kernel
phasefield_kernel = _impl.phasefield_kernel
