"""Knowledge-compilation toolkit: SDD restriction, protocol extraction,
DNNF to OR-FBDD conversion and hard function families."""

__version__ = "0.1.0"
