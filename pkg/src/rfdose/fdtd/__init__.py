import os

# The TBB layer shipped in some environments is too old for numba and only
# produces warnings; the portable work-queue layer is sufficient here.
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
