from ._backend import default_name as backend_name  # noqa: F401
