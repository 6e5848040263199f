"""Bundled SPMD programs, registered with the launcher on import."""
from . import ghz, hello, nqasm_run, scatter, teleport  # noqa: F401
