"""Select the compiled kernel backend, falling back to pure Python.

Set ``AFB_SCREEN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

fallback = _fallback

if os.environ.get("AFB_SCREEN_PURE_PYTHON", "") not in ("", "0"):
    compiled = None
else:
    try:
        from . import _core as compiled
    except ImportError:
        compiled = None

backend = compiled if compiled is not None else fallback
BACKEND_NAME = "compiled" if compiled is not None else "python"

label8 = backend.label8
trace_moore = backend.trace_moore
