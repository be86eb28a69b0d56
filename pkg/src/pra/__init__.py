"""Patient-to-room assignment: feasibility checks, single-room bounds, binary
programs and a rolling-horizon driver."""

from .core import (Assignment, Census, Instance, InstanceError, Patient, RoomSpec, Ward, census,
                   count_private_single_days, count_transfers, load_instance, validate_assignment)

__version__ = "0.1.0"

__all__ = [
    "Assignment", "Census", "Instance", "InstanceError", "Patient", "RoomSpec", "Ward", "census",
    "count_private_single_days", "count_transfers", "load_instance", "validate_assignment",
]
