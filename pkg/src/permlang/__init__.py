"""PermLang: a HeapLang-style concurrent language instrumented with call
permissions, together with a termination checker, an interpreter, an
exhaustive interleaving explorer and an erasure pass."""

__version__ = "0.1.0"
