"""Monocular obstacle detection and avoidance from dense optical flow.

The stack is organized as a handful of small, independently testable layers:

- ``flownav.flow``: dense two-frame motion estimation by local polynomial
  expansion, with iterative refinement and a coarse-to-fine pyramid.
- ``flownav.detector``: semi-dense flow sampling over five vertical image
  regions, producing a persistence-checked obstacle signal in {-1, 0, +1}.
- ``flownav.pilot``: the reactive flight state machine (takeoff, fly forward,
  sidestep, override hover, land).
- ``flownav.bus``: an in-process pub/sub topic layer emulating a robot driver
  (real-time and fixed-rate delivery).
- ``flownav.simworld``: a deterministic software-rendered world with ground
  truth for closed-loop evaluation.
- ``flownav.harness``: CLI entry points wiring the layers into replay,
  headless simulation, and a served live loop for the operator console.

Hot numeric kernels are JIT-compiled with numba by default; set
``FLOWNAV_BACKEND=numpy`` to force the pure-numpy fallback (see
``flownav.backend``).
"""

from flownav.backend import active_backend, set_backend

__version__ = "0.1.0"

__all__ = ["active_backend", "set_backend", "__version__"]
