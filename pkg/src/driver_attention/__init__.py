"""Driver attention analytics from head pose and vehicle perception logs."""

__version__ = "0.1.0"
