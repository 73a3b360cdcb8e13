"""Reflection kernels: a compiled Cython core and a NumPy fallback.

Both modules expose the same two functions with identical semantics:

``reflect_batch(a, b, lower, upper, max_bounces) -> (out, counts, bad_row)``
    Iterated face reflection of each row segment ``a[i] -> b[i]`` in the box
    ``[lower, upper]``.  ``bad_row`` is ``-1`` on success, otherwise the
    first row that exhausted ``max_bounces``.

``fold_batch(b, lower, upper) -> out``
    Closed-form triangle-wave fold of each row into the box.
"""
