"""Array-protocol wrapper over the flat symbol set.

Load once, refine many::

    import drlbind

    with drlbind.load(text=open("rules.txt").read()) as layer:
        refined = layer.refine(batch)                  # (n, D) float64
        refined, jac = layer.refine(batch, jacobian=True)

Buffer columns follow ``layer.names``. The boundary carries only numeric
buffers and strings; gradient integration composes the returned Jacobians
host-side.
"""

from __future__ import annotations

import numpy as np

from . import flat
from .flat import drl_last_error, drl_load, drl_refine_batch, drl_release

__all__ = [
    "BindingError",
    "UnsatisfiableError",
    "LayerHandle",
    "load",
    "drl_load",
    "drl_refine_batch",
    "drl_release",
    "drl_last_error",
]


class BindingError(RuntimeError):
    pass


class UnsatisfiableError(BindingError):
    def __init__(self, message: str, witness: str):
        super().__init__(message)
        self.witness = witness


class LayerHandle:
    """Immutable reference to a compiled layer; safe to share across threads."""

    def __init__(self, handle: int, names: tuple[str, ...]):
        self._handle = handle
        self.names = names
        self.dimension = len(names)

    def refine(self, batch: np.ndarray, jacobian: bool = False):
        """Refine a row-major (n, D) float64 batch.

        Returns the refined array, plus an (n, D, D) Jacobian array when
        requested. The input is not modified.
        """
        if self._handle is None:
            raise BindingError("handle already released")
        arr = np.ascontiguousarray(batch, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != self.dimension:
            raise BindingError(
                f"expected (n, {self.dimension}) batch, got {arr.shape}")
        n, d = arr.shape
        out = np.empty_like(arr)
        jac = np.empty((n, d, d)) if jacobian else None
        rc = drl_refine_batch(self._handle, arr, n, d, out, jac)
        if rc != 0:
            raise BindingError(drl_last_error())
        return (out, jac) if jacobian else out

    def release(self) -> None:
        if self._handle is not None:
            drl_release(self._handle)
            self._handle = None

    close = release

    def __enter__(self) -> "LayerHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.release()


def load(text: str | None = None, path: str | None = None,
         order: str = "given", epsilon: str = "1e-6",
         seed: int = 0) -> LayerHandle:
    """Compile constraint text, or adopt a precompiled artifact file.

    Raises :class:`UnsatisfiableError` (with the witness clause rendered in
    constraint syntax) when the constraints admit no solution.
    """
    if (text is None) == (path is None):
        raise BindingError("pass exactly one of text= or path=")
    if text is not None:
        handle = drl_load(text, is_path=False, order=order, epsilon=epsilon,
                          seed=seed)
    else:
        handle = drl_load(path, is_path=True)
    if handle == 0:
        message = drl_last_error()
        if message.startswith("unsatisfiable"):
            witness = message.partition("witness:")[2].strip()
            raise UnsatisfiableError(message, witness)
        raise BindingError(message)
    names = flat.drl_handle_names(handle)
    return LayerHandle(handle, names)
