"""Block-acoustic preconditioning for the mixed elastic Helmholtz equation on staggered grids."""
import os as _os

_threads = _os.environ.get("HELMSTACK_THREADS")
if _threads:
    # must happen before numpy/numba spin up their thread pools
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMBA_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .core import (Grid, MediaModel, ModelError, FrequencySpec, apply_abc, builtin_grid,  # noqa: E402
                   builtin_media, select_omega)
from .discretize import assemble_saddle, point_source  # noqa: E402
from .krylov import KrylovConfig, SolverReport, fgmres_solve, gmres_solve  # noqa: E402
from .precond import (BlockAcousticPreconditioner, BlockSolverConfig,  # noqa: E402
                      MonolithicPreconditioner, SchurApproxPreconditioner, ZOperator)

__version__ = "0.1.0"
